#include "stabsde/report.hpp"

#include "stabsde/csv.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace stabsde {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> row_fields(const ConvergenceRow& r)
{
    return {std::to_string(r.N), fmt(r.h), fmt(r.value), fmt(r.estimate), fmt(r.ci), r.method};
}

std::string fit_line(const std::string& what, const OrderFit& f)
{
    std::ostringstream s;
    s << what << ": order " << fmt(f.order) << " +- " << fmt(f.std_error) << " (r2 " << fmt(f.r2) << ", rows "
      << f.used << ")";
    if (!f.reliable) s << " [unreliable: " << f.flag << "]";
    return s.str();
}

std::vector<std::string> fit_fields(const std::string& series, const OrderFit& f)
{
    return {series, fmt(f.order), fmt(f.std_error), fmt(f.intercept), fmt(f.r2), std::to_string(f.used),
            f.reliable ? "true" : "false", f.flag};
}

const std::vector<std::string> row_header{"N", "h", "value", "estimate", "ci", "method"};
const std::vector<std::string> fit_header{"series", "order", "std_error", "intercept", "r2", "used", "reliable", "flag"};

void add_convergence(Report& rep, const std::string& stem, const ConvergenceReport& r)
{
    Table rows{stem + ".csv", row_header, {}};
    for (const auto& x : r.rows) rows.rows.push_back(row_fields(x));
    for (const auto& x : r.extrapolated) rows.rows.push_back(row_fields(x));
    rep.tables.push_back(std::move(rows));
    rep.tables.push_back({stem + "_fit.csv", fit_header,
                          {fit_fields("raw", r.fit), fit_fields("extrapolated", r.extrapolated_fit)}});
    rep.summary.push_back(fit_line(r.name + " raw", r.fit));
    rep.summary.push_back(fit_line(r.name + " extrapolated", r.extrapolated_fit));
    for (const auto& n : r.notes) rep.summary.push_back(r.name + ": " + n);
}

} // namespace

Report make_report(const std::string& name, const ConvergenceReport& r)
{
    Report rep;
    rep.name = name;
    add_convergence(rep, r.name, r);
    rep.summary.insert(rep.summary.begin(),
                       r.name + " reference " + fmt(r.reference) + " +- " + fmt(r.reference_ci));
    return rep;
}

Report make_report(const std::string& name, const SeriesResult& r)
{
    Report rep;
    rep.name = name;
    Table t{"series_diagnostics.csv", {"r", "sup_norm", "mass", "wall_time_ms"}, {}};
    for (const auto& d : r.terms)
        t.rows.push_back({std::to_string(d.r), fmt(d.sup_norm), fmt(d.mass), fmt(d.wall_time_ms)});
    rep.tables.push_back(std::move(t));
    rep.densities.push_back({"density.csv", r.density});
    rep.summary.push_back("series terms " + std::to_string(r.terms.size()) + ", truncation estimate " +
                          fmt(r.truncation_estimate) + ", min " + fmt(r.min_value) + ", mass " + fmt(r.density.mass()));
    return rep;
}

Report make_report(const std::string& name, const DensityGrid& d)
{
    Report rep;
    rep.name = name;
    rep.densities.push_back({"density.csv", d});
    rep.summary.push_back(name + ": " + std::to_string(d.grid.n) + " nodes on [" + fmt(d.grid.lo) + ", " +
                          fmt(d.grid.hi()) + "], mass " + fmt(d.mass()));
    return rep;
}

Report make_report(const std::string& name, const DensityGapResult& r)
{
    Report rep;
    rep.name = name;
    add_convergence(rep, "weighted_l1", r.weighted);
    add_convergence(rep, "sup", r.sup);
    Table lt{"leading_term.csv", {"N", "h", "rel_l1"}, {}};
    for (size_t k = 0; k < r.leading_rel_l1.size(); ++k)
        lt.rows.push_back({std::to_string(r.p_N[k].N), fmt(r.p_ref.t / r.p_N[k].N), fmt(r.leading_rel_l1[k])});
    rep.tables.push_back(std::move(lt));
    rep.tables.push_back({"checks.csv",
                          {"quantity", "value"},
                          {{"route_gap", fmt(r.route_gap)},
                           {"chain_gap", fmt(r.chain_gap)},
                           {"leading_mass", fmt(r.leading_mass)},
                           {"envelope_inner", fmt(r.envelope_inner)},
                           {"envelope_outer", fmt(r.envelope_outer)},
                           {"envelope_ok", r.envelope_ok ? "true" : "false"}}});
    rep.densities.push_back({"p_ref.csv", r.p_ref});
    rep.densities.push_back({"p_series.csv", r.p_series});
    rep.densities.push_back({"leading_term_density.csv", r.leading});
    for (size_t k = 0; k < r.p_N.size(); ++k) {
        rep.densities.push_back({"p_N" + std::to_string(r.p_N[k].N) + ".csv", r.p_N[k]});
        rep.densities.push_back({"gap_over_h_N" + std::to_string(r.p_N[k].N) + ".csv", r.gap_over_h[k]});
    }
    Table sd{"series_diagnostics.csv", {"r", "sup_norm", "mass", "wall_time_ms"}, {}};
    for (const auto& d : r.series.terms)
        sd.rows.push_back({std::to_string(d.r), fmt(d.sup_norm), fmt(d.mass), fmt(d.wall_time_ms)});
    rep.tables.push_back(std::move(sd));
    rep.summary.push_back("reference routes: relative sup " + fmt(r.route_gap) + "; p_N chain check " + fmt(r.chain_gap));
    if (!r.leading_rel_l1.empty())
        rep.summary.push_back("leading term: relative L1 at the smallest h " + fmt(r.leading_rel_l1.back()) +
                              ", mass " + fmt(r.leading_mass));
    rep.summary.push_back(std::string("tail envelope: inner ") + fmt(r.envelope_inner) + ", outer " +
                          fmt(r.envelope_outer) + (r.envelope_ok ? " (ok)" : " (violated)"));
    return rep;
}

Report make_report(const std::string& name, const BoundSuiteResult& r)
{
    Report rep;
    rep.name = name;
    Table t{"bounds.csv", {"item", "passed", "measured", "refined", "detail"}, {}};
    int passed = 0;
    for (const auto& i : r.items) {
        t.rows.push_back({i.name, i.passed ? "true" : "false", fmt(i.measured), fmt(i.refined), i.detail});
        passed += i.passed;
        rep.summary.push_back(std::string(i.passed ? "pass " : "FAIL ") + i.name + ": " + fmt(i.measured) +
                              (i.refined != 0.0 ? " / " + fmt(i.refined) : ""));
    }
    rep.tables.push_back(std::move(t));
    rep.summary.insert(rep.summary.begin(), "bound suite: " + std::to_string(passed) + " of " +
                                                std::to_string(r.items.size()) + " items pass");
    return rep;
}

Report make_sample_report(const std::string& name, const Mat& s)
{
    Report rep;
    rep.name = name;
    Table t{"samples.csv", {}, {}};
    for (Eigen::Index i = 0; i < s.rows(); ++i) t.header.push_back("x" + std::to_string(i + 1));
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        std::vector<std::string> row;
        for (Eigen::Index i = 0; i < s.rows(); ++i) row.push_back(fmt(s(i, j)));
        t.rows.push_back(std::move(row));
    }
    rep.tables.push_back(std::move(t));
    rep.summary.push_back(name + ": " + std::to_string(s.cols()) + " draws in dimension " + std::to_string(s.rows()));
    return rep;
}

std::string summary_text(const std::vector<Report>& reports)
{
    std::string s;
    for (const auto& r : reports) {
        s += "[" + r.name + "]\n";
        for (const auto& l : r.summary) s += l + "\n";
    }
    return s;
}

void write_reports(const std::string& dir, const ExperimentConfig& cfg, const std::vector<Report>& reports, bool force)
{
    const fs::path root(dir);
    if (fs::exists(root)) {
        require(fs::is_directory(root), "output path " + dir + " exists and is not a directory");
        require(force || fs::is_empty(root), "output directory " + dir + " is not empty (use --force to overwrite)");
    }
    fs::create_directories(root);
    auto put = [](const fs::path& p, const std::string& text) {
        std::ofstream o(p, std::ios::binary);
        require(static_cast<bool>(o), "cannot write " + p.string());
        o << text;
    };
    put(root / "config.txt", cfg.echo());
    put(root / "summary.txt", summary_text(reports));
    for (const auto& r : reports) {
        const fs::path sub = root / r.name;
        fs::create_directories(sub);
        for (const auto& t : r.tables) {
            CsvWriter w((sub / t.file).string(), t.header);
            for (const auto& row : t.rows) w.row(row);
        }
        for (const auto& [file, d] : r.densities) write_density_csv(d, (sub / file).string());
    }
}

} // namespace stabsde
