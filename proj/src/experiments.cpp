#include "stabsde/experiments.hpp"

#include "stabsde/parallel.hpp"
#include "stabsde/quadrature.hpp"
#include "stabsde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stabsde {

namespace {

StableSpec driver_spec(const ExperimentConfig& cfg)
{
    if (cfg.dim == 1) return StableSpec::one_dim(cfg.alpha, cfg.scale, cfg.gamma);
    StableSpec s;
    s.alpha = cfg.alpha;
    s.dim = cfg.dim;
    s.gamma = Vec::Constant(cfg.dim, cfg.gamma);
    if (cfg.spectral == "isotropic") {
        s.spectral = SpectralMeasure::isotropic(cfg.dim, cfg.scale, cfg.alpha);
    } else if (cfg.spectral == "axes") {
        // mirrored atoms on the coordinate axes; each pair carries scale / 2 per atom
        std::vector<Vec> atoms;
        std::vector<double> w;
        for (int i = 0; i < cfg.dim; ++i) {
            for (double sg : {1.0, -1.0}) {
                Vec e = Vec::Zero(cfg.dim);
                e[i] = sg;
                atoms.push_back(e);
                w.push_back(0.5 * cfg.scale);
            }
        }
        s.spectral = SpectralMeasure::discrete(atoms, w, cfg.alpha);
    } else {
        throw Error("config: spectral must be isotropic or axes when dim > 1, got '" + cfg.spectral + "'");
    }
    s.validate();
    return s;
}

double rel_sup(const Vec& a, const Vec& b)
{
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

DensityGrid make_grid_density(const UniformGrid& g, const Vec& v, const TailFitter& fit, double t, double x0,
                              double alpha, int N)
{
    DensityGrid d;
    d.grid = g;
    d.values = v;
    d.tail = fit.fit(v);
    d.t = t;
    d.x0 = x0;
    d.alpha = alpha;
    d.N = N;
    return d;
}

} // namespace

DensityGridSpec experiment_grid(const ExperimentConfig& cfg, const Model& model)
{
    DensityGridSpec dg = default_density_grid(model, cfg.x0, model.T / cfg.n_fine);
    if (cfg.grid_half_width > 0.0) dg.half_width = cfg.grid_half_width;
    if (cfg.grid_points > 0) dg.points = cfg.grid_points;
    dg.tail_fraction = cfg.tail_fraction;
    while ((dg.points - 1) % (2 * cfg.coarsen) != 0) ++dg.points;
    return dg;
}

Mat run_sample(const ExperimentConfig& cfg)
{
    cfg.validate();
    StableSpec s = driver_spec(cfg);
    Stream rng(cfg.seed, "sample", 0);
    return sample_vector(s, cfg.eval_time(), rng, cfg.n_samples);
}

DensityGrid run_frozen_density(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Model m = cfg.model();
    const DensityGridSpec dg = experiment_grid(cfg, m);
    const UniformGrid g = UniformGrid::centered(dg.center, dg.half_width, dg.points);
    FrozenDensityQuery q;
    q.y = cfg.freeze;
    q.t = cfg.eval_time();
    q.x = cfg.x0;
    q.z = g.points();
    const Vec v = eval(m, q);
    return make_grid_density(g, v, density_tail_fitter(m, g, cfg.x0, dg), q.t, cfg.x0, m.alpha(), 0);
}

DensityGrid run_euler_density(const ExperimentConfig& cfg, PropagationTrace* trace)
{
    cfg.validate();
    const Model m = cfg.model();
    const DensityGridSpec dg = experiment_grid(cfg, m);
    return propagate_density(m, GridSpec{cfg.N, cfg.eval_time(), {1}}, cfg.x0, dg, trace);
}

SeriesResult run_parametrix(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Model m = cfg.model();
    const DensityGridSpec dg = experiment_grid(cfg, m);
    const UniformGrid g = UniformGrid::centered(dg.center, dg.half_width, dg.points).coarsen(cfg.coarsen);
    SeriesOptions o;
    o.variant = parse_variant(cfg.variant);
    o.N = cfg.N;
    o.lag_steps = cfg.lag_steps;
    o.r_max = cfg.r_max;
    o.record_wall_time = cfg.record_wall_time;
    return series(m, cfg.eval_time(), cfg.x0, g, dg, o);
}

ConvergenceReport run_weak_error(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Model m = cfg.model();
    const TestFunction tf = cfg.test();
    const int base = cfg.ladder.front();
    std::vector<int> levels = cfg.ladder;
    const int n_ref = cfg.n_fine;
    levels.push_back(n_ref / 2);
    levels.push_back(n_ref);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    GridSpec gs;
    gs.N = base;
    gs.T = m.T;
    gs.nesting.clear();
    for (int L : levels) {
        require(L % base == 0, "weak-error: every level must be a multiple of the coarsest ladder entry");
        gs.nesting.push_back(L / base);
    }
    const long n = cfg.n_paths;
    PathBundle b = simulate_bundle(m, gs, Vec::Constant(1, cfg.x0), n, cfg.seed, 0);
    auto level = [&](int L) { return static_cast<int>(std::find(levels.begin(), levels.end(), L) - levels.begin()); };

    std::vector<std::uint8_t> bad(n, 0);
    long n_bad = 0;
    for (size_t l = 0; l < levels.size(); ++l)
        for (long p = 0; p < n; ++p) bad[p] |= b.overflow[l][p];
    for (auto f : bad) n_bad += f;
    const long n_ok = n - n_bad;
    require(n_ok >= 2, "weak-error: every path overflowed");

    // per-path g at each level
    Mat G(levels.size(), n);
    for (size_t l = 0; l < levels.size(); ++l)
        for (long p = 0; p < n; ++p) G(l, p) = tf.g(b.terminal[l](0, p));
    const Eigen::Index lf = level(n_ref), lh = level(n_ref / 2);

    auto stats = [&](const std::function<double(long)>& x, double& mean, double& ci) {
        // two-pass mean and variance over the non-flagged paths
        double s = 0.0;
        for (long p = 0; p < n; ++p)
            if (!bad[p]) s += x(p);
        mean = s / n_ok;
        double v = 0.0;
        for (long p = 0; p < n; ++p)
            if (!bad[p]) v += (x(p) - mean) * (x(p) - mean);
        ci = 1.96 * std::sqrt(v / (n_ok - 1) / n_ok);
    };
    auto ref = [&](long p) { return 2.0 * G(lf, p) - G(lh, p); };

    ConvergenceReport r;
    r.name = "weak_error";
    stats(ref, r.reference, r.reference_ci);
    for (int N : cfg.ladder) {
        const Eigen::Index l = level(N);
        ConvergenceRow row;
        row.N = N;
        row.h = m.T / N;
        double ci0;
        stats([&](long p) { return G(l, p); }, row.value, ci0);
        stats([&](long p) { return ref(p) - G(l, p); }, row.estimate, row.ci);
        row.method = "euler";
        r.rows.push_back(row);
    }
    for (int N : cfg.ladder) {
        if (std::find(cfg.ladder.begin(), cfg.ladder.end(), 2 * N) == cfg.ladder.end()) continue;
        const Eigen::Index l = level(N), l2 = level(2 * N);
        ConvergenceRow row;
        row.N = N;
        row.h = m.T / N;
        double ci0;
        stats([&](long p) { return 2.0 * G(l2, p) - G(l, p); }, row.value, ci0);
        stats([&](long p) { return ref(p) - (2.0 * G(l2, p) - G(l, p)); }, row.estimate, row.ci);
        row.method = "richardson";
        r.extrapolated.push_back(row);
    }
    r.fit = fit_order(r.rows);
    r.extrapolated_fit = fit_order(r.extrapolated);
    r.notes.push_back("reference: 2 E g(X^" + std::to_string(n_ref) + ") - E g(X^" + std::to_string(n_ref / 2) +
                      ") on the same paths (tagged reference, not truth)");
    r.notes.push_back("test function: " + tf.name);
    r.notes.push_back("overflowed paths excluded: " + std::to_string(n_bad));
    if (r.fit.used < static_cast<int>(r.rows.size()))
        r.notes.push_back("rows dropped by the CI filter: " + std::to_string(r.rows.size() - r.fit.used));
    return r;
}

DensityGapResult run_density_gap(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Model m = cfg.model();
    require(m.coeffs.dim == 1, "density-gap: only d = 1 is supported");
    const DensityGridSpec dg = experiment_grid(cfg, m);
    const UniformGrid ug = UniformGrid::centered(dg.center, dg.half_width, dg.points);
    const TailFitter fit = density_tail_fitter(m, ug, cfg.x0, dg);
    const double T = m.T, a = m.alpha();
    DensityGapResult res;

    // Euler chain densities on the fine grid
    std::vector<Vec> pN;
    for (int N : cfg.ladder) {
        GridSpec gs{N, T, {1}};
        TransitionOperator op(m, ug, gs.h(), fit);
        pN.push_back(propagate_density(m, gs, cfg.x0, ug, op, dg).values);
    }
    Vec p_half;
    {
        GridSpec gs{cfg.n_fine / 2, T, {1}};
        TransitionOperator op(m, ug, gs.h(), fit);
        p_half = propagate_density(m, gs, cfg.x0, ug, op, dg).values;
    }
    GridSpec gf{cfg.n_fine, T, {1}};
    TransitionOperator opf(m, ug, gf.h(), fit);
    std::vector<Vec> snaps;
    const Vec p_fine = propagate_density(m, gf, cfg.x0, ug, opf, dg, nullptr, &snaps).values;
    const Vec p_ref = 2.0 * p_fine - p_half;
    res.p_ref = make_grid_density(ug, p_ref, fit, T, cfg.x0, a, cfg.n_fine);

    // second route: continuous parametrix series on the coarsened grid
    const UniformGrid cg = ug.coarsen(cfg.coarsen);
    SeriesEngine eng(m, T, cfg.x0, cg, dg, cfg.lag_steps);
    SeriesOptions so;
    so.lag_steps = cfg.lag_steps;
    so.r_max = cfg.r_max;
    so.record_wall_time = cfg.record_wall_time;
    res.series = eng.run(so);
    res.p_series = res.series.density;
    Vec ref_c(cg.n);
    for (int i = 0; i < cg.n; ++i) ref_c[i] = p_ref[i * cfg.coarsen];
    res.route_gap = rel_sup(res.p_series.values, ref_c);
    {
        // the chain itself, two ways: discrete series p_N against propagate_density
        const int N = cfg.ladder.front();
        SeriesOptions sn = so;
        sn.variant = SeriesVariant::PN;
        sn.N = N;
        const SeriesResult rn = eng.run(sn);
        GridSpec gs{N, T, {1}};
        TransitionOperator op(m, cg, gs.h(), eng.fitter());
        const DensityGrid e = propagate_density(m, gs, cfg.x0, cg, op, dg);
        res.chain_gap = rel_sup(rn.density.values, e.values);
    }
    if (res.route_gap > cfg.gate)
        throw Error("density-gap: the two reference routes disagree (relative sup " + std::to_string(res.route_gap) +
                    " > gate " + std::to_string(cfg.gate) + "); no gap reported");

    res.leading = leading_term_M2(m, T, cfg.x0, ug, opf, snaps);
    res.leading_mass = res.leading.mass();

    res.weighted.name = "density_gap_weighted_l1";
    res.sup.name = "density_gap_sup";
    const double W = dg.half_width;
    for (size_t k = 0; k < cfg.ladder.size(); ++k) {
        const int N = cfg.ladder[k];
        const double h = T / N;
        const Vec gap = p_ref - pN[k];
        res.p_N.push_back(make_grid_density(ug, pN[k], fit, T, cfg.x0, a, N));
        res.gap_over_h.push_back(make_grid_density(ug, gap / h, fit, T, cfg.x0, a, N));
        ConvergenceRow r;
        r.N = N;
        r.h = h;
        r.value = r.estimate = weighted_l1(ug, gap, cfg.x0, 1.0 + a);
        r.method = "euler";
        res.weighted.rows.push_back(r);
        r.value = r.estimate = gap.cwiseAbs().maxCoeff();
        res.sup.rows.push_back(r);
        res.leading_rel_l1.push_back(l1(ug, gap / h - res.leading.values) / l1(ug, res.leading.values));
        if (k + 1 < cfg.ladder.size() && cfg.ladder[k + 1] == 2 * N) {
            const Vec rg = p_ref - (2.0 * pN[k + 1] - pN[k]);
            ConvergenceRow e = r;
            e.method = "richardson";
            e.value = e.estimate = weighted_l1(ug, rg, cfg.x0, 1.0 + a);
            res.weighted.extrapolated.push_back(e);
            e.value = e.estimate = rg.cwiseAbs().maxCoeff();
            res.sup.extrapolated.push_back(e);
        }
        if (k + 1 == cfg.ladder.size()) {
            double inner = 0.0, outer = 0.0;
            for (int i = 0; i < ug.n; ++i) {
                const double r0 = std::abs(ug.x(i) - cfg.x0);
                const double v = std::abs(gap[i]) * (1.0 + std::pow(r0, 1.0 + a));
                (r0 <= 0.5 * W ? inner : outer) = std::max(r0 <= 0.5 * W ? inner : outer, v);
            }
            res.envelope_inner = inner;
            res.envelope_outer = outer;
            res.envelope_ok = std::isfinite(outer) && outer <= 4.0 * inner;
        }
    }
    for (auto* rep : {&res.weighted, &res.sup}) {
        rep->fit = fit_order(rep->rows);
        rep->extrapolated_fit = fit_order(rep->extrapolated);
        rep->notes.push_back("reference: 2 p^" + std::to_string(cfg.n_fine) + " - p^" + std::to_string(cfg.n_fine / 2) +
                             " on the fine grid, cross-checked against the continuous parametrix series");
    }
    return res;
}

bool BoundSuiteResult::all_passed() const
{
    for (const auto& i : items)
        if (!i.passed) return false;
    return true;
}

double kernel_ratio_sup(const Model& model, const std::vector<double>& times, double lo, double hi, int n)
{
    double sup = 0.0;
    for (double t : times) {
        std::vector<double> row(n, 0.0);
        parallel_for(0, n, [&](long i) {
            const double x = lo + (hi - lo) * i / (n - 1);
            double s = 0.0;
            for (int j = 0; j < n; ++j) {
                const double y = lo + (hi - lo) * j / (n - 1);
                const double p = frozen_law(model, y).density(t, x, y);
                const double r = std::abs(kernel_H(model, t, x, y)) / (p * (1.0 + std::min(1.0, std::abs(x - y)) / t));
                s = std::max(s, r);
            }
            row[i] = s;
        });
        for (double v : row) sup = std::max(sup, v);
    }
    return sup;
}

double double_convolution_ratio(const Model& model, double t, double x0, const std::vector<double>& ys)
{
    const double a = model.alpha();
    const double omega = std::min(1.0, 1.0 / a);
    const double c1 = model.coeffs.c_lower * std::pow(model.base_scale(), 1.0 / a);
    Vec u, w;
    endpoint_singular_rule(t, omega, 24, u, w);
    std::vector<double> out(ys.size(), 0.0);
    parallel_for(0, static_cast<long>(ys.size()), [&](long k) {
        const double y = ys[k];
        double total = 0.0;
        for (Eigen::Index q = 0; q < u.size(); ++q) {
            const double s1 = u[q], s2 = t - u[q];
            auto f = [&](double z) { return kernel_H(model, s1, x0, z) * kernel_H(model, s2, z, y); };
            const double scale = c1 * std::pow(std::min(s1, s2), 1.0 / a);
            total += w[q] * integrate_real_line(f, {x0, y}, scale);
        }
        const double p = frozen_law(model, y).density(t, x0, y);
        out[k] = std::abs(total) / (std::pow(t, omega - 1.0) * p);
    });
    return *std::max_element(out.begin(), out.end());
}

BoundSuiteResult run_bound_suite(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Model m = cfg.model();
    const double a = m.alpha(), x0 = cfg.x0, T = m.T;
    BoundSuiteResult res;
    auto add = [&](std::string name, bool ok, double v, double r, std::string d) {
        res.items.push_back({std::move(name), ok, v, r, std::move(d)});
    };
    auto stable = [](double v, double r, double tol) {
        return std::isfinite(v) && std::isfinite(r) && std::abs(r - v) <= tol * std::max(std::abs(v), 1e-300) + 1e-300;
    };
    const FrozenLaw l0 = frozen_law(m, x0);

    {
        // normalisation, grid plus fitted tail
        double worst = 0.0;
        for (double t : {0.01, 0.1, 1.0}) {
            const double tt = t * T, sg = l0.sigma(tt), c = x0 + l0.B * tt;
            const UniformGrid g = UniformGrid::centered(c, 200.0 * sg, 12001);
            Vec v(g.n);
            for (int i = 0; i < g.n; ++i) v[i] = l0.density(tt, x0, g.x(i));
            const TailFitter f = TailFitter::make(g, 1.0 + a, c, 0.05, 1.0 + 2.0 * a);
            worst = std::max(worst, std::abs(g.trapezoid_weights().dot(v) + f.fit(v).mass(g) - 1.0));
        }
        add("frozen normalization", worst <= 1e-6, worst, 0.0, "max |integral - 1| over t/T in {0.01, 0.1, 1}");
    }
    {
        // Chapman-Kolmogorov at fixed freeze point
        const double t1 = 0.3 * T, t2 = 0.7 * T;
        double worst = 0.0;
        for (int k = 0; k <= 20; ++k) {
            const double wv = x0 - 5.0 + 0.5 * k;
            auto f = [&](double z) { return l0.density(t1, x0, z) * l0.density(t2, z, wv); };
            const double I = integrate_real_line(f, {x0 + l0.B * t1, wv - l0.B * t2}, l0.sigma(std::min(t1, t2)));
            worst = std::max(worst, std::abs(I - l0.density(t1 + t2, x0, wv)));
        }
        add("chapman-kolmogorov", worst <= 1e-5, worst, 0.0, "sup |int p~(t) p~(s) - p~(t+s)| on 21 points");
    }
    {
        double worst = 0.0;
        const FrozenLaw l1 = frozen_law(a, l0.c, 0.0);
        for (double t : {0.05, 0.5, 1.0}) {
            const double tt = t * T, s = std::pow(tt, 1.0 / a);
            for (int k = 0; k <= 40; ++k) {
                const double z = x0 - 10.0 + 0.5 * k;
                const double lhs = l0.density(tt, x0, z);
                const double rhs = l1.density(1.0, 0.0, (z - x0 - l0.B * tt) / s) / s;
                worst = std::max(worst, std::abs(lhs - rhs));
            }
        }
        add("self-similarity", worst <= 1e-8, worst, 0.0, "sup |p~(t) - t^(-1/alpha) p~(1, scaled)|");
    }
    auto probe = [&](int n) {
        std::vector<double> p(n);
        for (int i = 0; i < n; ++i) p[i] = x0 - 10.0 + 20.0 * i / (n - 1);
        return p;
    };
    {
        auto comparison = [&](int n) {
            const auto pts = probe(n);
            double C = 0.0;
            for (double t : {0.1, 0.5, 1.0})
                for (double x : pts)
                    for (double z : pts) {
                        const double pz = frozen_law(m, z).density(t * T, x, z);
                        for (double y : pts) C = std::max(C, pz / frozen_law(m, y).density(t * T, x, z));
                    }
            return C;
        };
        const double c1 = comparison(21), c2 = comparison(41);
        add("frozen comparison constant", std::isfinite(c2) && stable(c1, c2, 0.05), c1, c2,
            "sup p~^z(t,x,z) / p~^y(t,x,z) over a product probe grid");
    }
    {
        // two regimes with K = 1: t^(1/alpha) p~ near, p~ |x - z|^(1+alpha) / t far
        auto two = [&](int n) {
            double C = 1.0;
            for (double t : {0.01, 0.1, 1.0}) {
                const double tt = t * T;
                for (double y : probe(11)) {
                    const FrozenLaw l = frozen_law(m, y);
                    for (int k = 0; k < n; ++k) {
                        const double r = std::pow(10.0, -3.0 + 6.0 * k / (n - 1));
                        for (double sgn : {-1.0, 1.0}) {
                            const double z = x0 + sgn * r;
                            const double p = l.density(tt, x0, z);
                            const double ratio = r <= std::pow(tt, 1.0 / a) ? p * std::pow(tt, 1.0 / a)
                                                                            : p * std::pow(r, 1.0 + a) / tt;
                            C = std::max({C, ratio, 1.0 / ratio});
                        }
                    }
                }
            }
            return C;
        };
        const double c1 = two(61), c2 = two(121);
        add("two-regime density bounds", std::isfinite(c2) && stable(c1, c2, 0.05), c1, c2,
            "single (K, C) with K = 1; C is the measured constant");
    }
    for (int order : {1, 2}) {
        const DerivativeBoundReport r = check_derivative_bounds(m, x0, 0.5 * T, order, x0 - 30.0, x0 + 30.0, 1201, x0);
        add("derivative bound a=" + std::to_string(order), r.finite && r.stable, r.sup_time, r.sup_time_refined,
            "sup |D^a p~| t^(a/alpha) / p~ (space form " + std::to_string(r.sup_space) + ")");
    }
    {
        const TailFit f1 = tail_coefficient(m, x0, 1, T);
        const TailFit f2 = tail_coefficient(m, x0, 1, 0.5 * T);
        const double ref = l0.c * StableFunctions::get(a).tail_constant();
        const double e = std::abs(f1.value / ref - 1.0);
        add("tail constant", e <= 1e-2 && f1.value > 0.0, f1.value, ref, "fitted far-field constant vs c Gamma(1+a) sin(pi a/2)/pi");
        const FrozenLaw& l = l0;
        const double z = x0 + 400.0 * l.sigma(T);
        const double ratio = l.density(T, x0, z) / l.density(0.5 * T, x0, z);
        add("tail linear in t", std::abs(ratio - 2.0) <= 0.02 && std::abs(f2.value / f1.value - 1.0) <= 1e-2, ratio, 2.0,
            "far-field density ratio when t doubles");
    }
    {
        const std::vector<double> times{0.05 * T, 0.25 * T, T};
        const double k1 = kernel_ratio_sup(m, times, x0 - 5.0, x0 + 5.0, 101);
        const double k2 = kernel_ratio_sup(m, times, x0 - 5.0, x0 + 5.0, 201);
        add("kernel ratio", std::isfinite(k2) && stable(k1, k2, 0.02), k1, k2,
            "sup |H| / (p~ (1 + min(1, |x - y|) / t))");
    }
    {
        std::vector<double> ys;
        for (int k = -4; k <= 4; ++k) ys.push_back(x0 + k);
        double worst = 0.0;
        for (double t : {0.25 * T, T}) worst = std::max(worst, double_convolution_ratio(m, t, x0, ys));
        add("double convolution envelope", std::isfinite(worst), worst, 0.0, "sup |H (x) H| / (t^(omega-1) p~)");
    }
    {
        const DensityGridSpec dg = experiment_grid(cfg, m);
        const UniformGrid cg = UniformGrid::centered(dg.center, dg.half_width, dg.points).coarsen(cfg.coarsen);
        SeriesEngine eng(m, T, x0, cg, dg, cfg.lag_steps);
        SeriesOptions o;
        o.lag_steps = cfg.lag_steps;
        o.r_max = cfg.r_max;
        const SeriesResult p = eng.run(o);
        o.variant = SeriesVariant::PD;
        o.N = 8;
        const double g8 = (eng.run(o).density.values - p.density.values).cwiseAbs().maxCoeff();
        o.N = 16;
        const double g16 = (eng.run(o).density.values - p.density.values).cwiseAbs().maxCoeff();
        const double ratio = g16 > 0.0 ? g8 / g16 : 0.0;
        const bool exact = g8 < 1e-12 && g16 < 1e-12;
        add("series consistency p vs p_d", exact || (ratio >= 1.6 && ratio <= 2.5), ratio, g16,
            "sup |p - p_d| shrink factor when N goes 8 -> 16");
        const double mass = p.density.mass();
        add("series nonnegativity and mass", p.min_value >= -1e-6 && std::abs(mass - 1.0) <= 1e-3, p.min_value, mass,
            "min of the summed density, and its mass");
    }
    return res;
}

} // namespace stabsde
