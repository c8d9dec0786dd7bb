#include "stabsde/parallel.hpp"
#include "stabsde/quadrature.hpp"
#include "stabsde/report.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace stabsde;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch_dir(const std::string& name)
{
    const fs::path d = fs::temp_directory_path() / ("stabsde_" + name);
    fs::remove_all(d);
    return d;
}

ExperimentConfig small_weak_error()
{
    return parse_config("ladder = 4, 8, 16\n"
                        "n_fine = 64\n"
                        "n_paths = 4000\n"
                        "seed = 99\n",
                        "inline");
}

} // namespace

TEST_CASE("config parsing")
{
    const ExperimentConfig c = parse_config("# header comment\n"
                                            "alpha = 1.2   # inline\n"
                                            "\n"
                                            "ladder = 8, 16, 32\n"
                                            "b_kind = constant\n"
                                            "b_level = 0.5\n"
                                            "test_function = power\n"
                                            "g_beta = 0.5\n"
                                            "record_wall_time = true\n",
                                            "t.conf");
    CHECK(c.alpha == 1.2);
    CHECK(c.ladder == std::vector<int>{8, 16, 32});
    CHECK(c.b.level == 0.5);
    CHECK(c.record_wall_time);
    CHECK_NOTHROW(c.validate());

    CHECK_THROWS_WITH_AS(parse_config("alpha = 1.5\nbogus = 3\n", "x.conf"), "x.conf:2: unknown key 'bogus'", Error);
    CHECK_THROWS_WITH_AS(parse_config("alpha = 1.5\nalpha = 1.2\n", "x.conf"), "x.conf:2: key 'alpha' repeats line 1",
                         Error);
    CHECK_THROWS_WITH_AS(parse_config("alpha = many\n", "x.conf"),
                         "x.conf:1: config: key 'alpha' expects a number, got 'many'", Error);
    CHECK_THROWS_AS(parse_config("alpha 1.5\n", "x.conf"), Error);
    CHECK_THROWS_AS(parse_config("ladder = 8, 24\n", "x").validate(), Error);
    CHECK_THROWS_AS(parse_config("test_function = power\ng_beta = 1.6\n", "x").validate(), Error);
    CHECK_THROWS_AS(parse_config("test_function = cubic\n", "x").validate(), Error);
}

TEST_CASE("config echo round-trips")
{
    ExperimentConfig c = small_weak_error();
    c.f.amp = 0.125;
    const ExperimentConfig d = parse_config(c.echo(), "echo");
    CHECK(d.echo() == c.echo());
}

TEST_CASE("test functions")
{
    CHECK(make_test_function("smooth_bounded", 1.5, 0.5, 0.0, 1.0).g(1.0) == 0.5);
    CHECK(make_test_function("lipschitz", 1.5, 0.5, 0.0, 2.0).g(-3.0) == 2.0);
    CHECK(make_test_function("indicator", 1.5, 0.5, 0.5, 1.0).g(0.5) == 1.0);
    CHECK(make_test_function("power", 1.5, 0.5, 0.0, 1.0).g(4.0) == doctest::Approx(2.0));
}

TEST_CASE("order fit")
{
    std::vector<ConvergenceRow> rows;
    for (int N : {8, 16, 32, 64}) rows.push_back({N, 1.0 / N, 0.0, 0.3 / N, 0.0, "euler"});
    OrderFit f = fit_order(rows);
    CHECK(f.reliable);
    CHECK(f.order == doctest::Approx(1.0));
    CHECK(f.used == 4);
    rows[1].ci = rows[1].estimate;  // too noisy, dropped
    CHECK(fit_order(rows).used == 3);
    std::vector<ConvergenceRow> scattered = {{8, 1.0 / 8, 0, 1e-2, 0, ""}, {16, 1.0 / 16, 0, 1e-4, 0, ""},
                                             {32, 1.0 / 32, 0, 1e-2, 0, ""}, {64, 1.0 / 64, 0, 1e-4, 0, ""}};
    f = fit_order(scattered);
    CHECK_FALSE(f.reliable);
    CHECK(f.flag == "r2 below 0.95");
    std::vector<ConvergenceRow> zero = {{8, 1.0 / 8, 1.0, 0.0, 0.0, ""}, {16, 1.0 / 16, 1.0, 0.0, 0.0, ""}};
    CHECK(fit_order(zero).flag == "degenerate");
}

TEST_CASE("weak-error ladder: structure and constant-coefficient degeneracy")
{
    ExperimentConfig c = small_weak_error();
    const ConvergenceReport r = run_weak_error(c);
    CHECK(r.rows.size() == 3);
    CHECK(r.extrapolated.size() == 2);
    for (const auto& row : r.rows) CHECK(row.ci > 0.0);

    c.b = Preset{"constant", 0.25};
    c.f = Preset{"constant", 1.0};
    const ConvergenceReport z = run_weak_error(c);
    CHECK(z.fit.flag == "degenerate");
    for (const auto& row : z.rows) CHECK(std::abs(row.estimate) < 1e-12);
}

TEST_CASE("reports: layout, collision and byte-identical reruns")
{
    const ExperimentConfig c = small_weak_error();
    const fs::path a = scratch_dir("rep_a"), b = scratch_dir("rep_b");
    write_reports(a.string(), c, {make_report("weak_error", run_weak_error(c))}, false);
    write_reports(b.string(), c, {make_report("weak_error", run_weak_error(c))}, false);
    CHECK(slurp(a / "config.txt") == c.echo());
    const std::string rows = slurp(a / "weak_error" / "weak_error.csv");
    CHECK(rows.rfind("N,h,value,estimate,ci,method\r\n", 0) == 0);
    int lines = 0;
    for (char ch : rows) lines += ch == '\n';
    CHECK(lines == 1 + 3 + 2);
    CHECK(fs::exists(a / "weak_error" / "weak_error_fit.csv"));
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        CHECK(slurp(e.path()) == slurp(b / fs::relative(e.path(), a)));
    }
    CHECK_THROWS_AS(write_reports(a.string(), c, {}, false), Error);
    CHECK_NOTHROW(write_reports(a.string(), c, {}, true));
    CHECK(slurp(a / "summary.txt").empty());
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("results do not depend on the thread count")
{
    ExperimentConfig c = small_weak_error();
    set_threads(1);
    const ConvergenceReport one = run_weak_error(c);
    set_threads(3);
    const ConvergenceReport three = run_weak_error(c);
    set_threads(1);
    for (size_t i = 0; i < one.rows.size(); ++i) CHECK(one.rows[i].estimate == three.rows[i].estimate);
}

TEST_CASE("Monte Carlo intervals cover the quadrature value")
{
    // constant coefficients: X_T = x0 + b T + f Z_T, E g by quadrature against the exact density
    const Model m = Model::make(StableSpec::one_dim(1.5, 1.0), CoefficientField::constant(0.3, 0.8), 1.0);
    const FrozenLaw l = frozen_law(m, 0.0);
    const TestFunction g = make_test_function("smooth_bounded", 1.5, 0.5, 0.0, 1.0);
    const double exact = integrate_real_line([&](double z) { return g.g(z) * l.density(1.0, 0.0, z); }, {0.0, 0.3},
                                             l.sigma(1.0));
    const long n = 4000;
    int covered = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const PathBundle b = simulate_bundle(m, GridSpec{4, 1.0, {1}}, Vec::Constant(1, 0.0), n, 1000 + rep);
        double s = 0.0, s2 = 0.0;
        for (long p = 0; p < n; ++p) {
            const double v = g.g(b.terminal[0](0, p));
            s += v;
            s2 += v * v;
        }
        const double mean = s / n, var = (s2 - n * mean * mean) / (n - 1);
        covered += std::abs(mean - exact) <= 1.96 * std::sqrt(var / n);
    }
    CHECK(covered >= 45);
}
