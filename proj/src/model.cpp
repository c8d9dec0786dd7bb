#include "stabsde/model.hpp"

#include "stabsde/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stabsde {

double ScalarFn::d(double x, int k) const
{
    require(k >= 0 && k <= max_order, "ScalarFn: derivative order " + std::to_string(k) + " unavailable");
    return eval(x, k);
}

namespace {

// k-th derivative of tanh
double tanh_d(double x, int k)
{
    double t = std::tanh(x), s = 1.0 - t * t;
    switch (k) {
    case 0: return t;
    case 1: return s;
    case 2: return -2.0 * t * s;
    case 3: return s * (6.0 * t * t - 2.0);
    case 4: return s * (16.0 * t - 24.0 * t * t * t);
    default: throw Error("tanh preset: derivative order above 4");
    }
}

} // namespace

ScalarFn make_preset(const Preset& p)
{
    ScalarFn fn;
    if (p.kind == "constant") {
        double v = p.level;
        fn.eval = [v](double, int k) { return k == 0 ? v : 0.0; };
    } else if (p.kind == "tanh") {
        require(p.width > 0.0, "tanh preset: width must be positive");
        double l = p.level, a = p.amp, w = p.width;
        fn.eval = [l, a, w](double x, int k) {
            double v = a * std::pow(w, 1.0 - k) * tanh_d(x / w, k);
            return k == 0 ? l + v : v;
        };
    } else if (p.kind == "sine") {
        double l = p.level, a = p.amp, om = p.freq, ph = p.phase;
        fn.eval = [l, a, om, ph](double x, int k) {
            double v = a * std::pow(om, k) * std::sin(om * x + ph + 0.5 * pi * k);
            return k == 0 ? l + v : v;
        };
    } else {
        throw Error("unknown coefficient preset '" + p.kind + "' (expected constant, tanh or sine)");
    }
    return fn;
}

CoefficientField CoefficientField::one_dim(ScalarFn b, ScalarFn f, int q, double probe_half_width)
{
    CoefficientField cf;
    cf.dim = 1;
    cf.b = b;
    cf.f = f;
    cf.q = q;
    cf.probe_half_width = probe_half_width;
    cf.b_vec = [b](const Vec& x) { return Vec::Constant(1, b(x[0])); };
    cf.f_mat = [f](const Vec& x) { return Mat::Constant(1, 1, f(x[0])); };
    cf.c_lower = std::numeric_limits<double>::infinity();
    cf.c_upper = 0.0;
    for (int i = 0; i < cf.probe_points; ++i) {
        double x = -probe_half_width + 2.0 * probe_half_width * i / (cf.probe_points - 1);
        double fx = f(x);
        cf.b_sup = std::max(cf.b_sup, std::abs(b(x)));
        cf.f_sup = std::max(cf.f_sup, std::abs(fx));
        cf.c_lower = std::min(cf.c_lower, fx);
        cf.c_upper = std::max(cf.c_upper, fx);
    }
    require(cf.c_lower > 0.0, "CoefficientField: f is not uniformly elliptic on the probe grid");
    return cf;
}

CoefficientField CoefficientField::multi_dim(int dim, std::function<Vec(const Vec&)> b,
                                             std::function<Mat(const Vec&)> f, int q,
                                             double probe_half_width)
{
    CoefficientField cf;
    cf.dim = dim;
    cf.b_vec = std::move(b);
    cf.f_mat = std::move(f);
    cf.q = q;
    cf.probe_half_width = probe_half_width;
    cf.c_lower = std::numeric_limits<double>::infinity();
    cf.c_upper = 0.0;
    Stream rng(0x9e37ULL, "coefficient-probe", static_cast<std::uint64_t>(dim));
    for (int i = 0; i < cf.probe_points; ++i) {
        Vec x(dim);
        for (int k = 0; k < dim; ++k) x[k] = rng.uniform(-probe_half_width, probe_half_width);
        Mat fx = cf.f_mat(x);
        require(fx.rows() == dim && fx.cols() == dim, "CoefficientField: f has wrong shape");
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (fx + fx.transpose()));
        cf.c_lower = std::min(cf.c_lower, es.eigenvalues().minCoeff());
        cf.c_upper = std::max(cf.c_upper, es.eigenvalues().maxCoeff());
        cf.b_sup = std::max(cf.b_sup, cf.b_vec(x).norm());
        cf.f_sup = std::max(cf.f_sup, fx.norm());
    }
    require(cf.c_lower > 0.0, "CoefficientField: f is not uniformly elliptic on the probe grid");
    return cf;
}

CoefficientField CoefficientField::constant(double b0, double f0)
{
    return one_dim(make_preset({"constant", b0}), make_preset({"constant", f0}));
}

Model Model::make(StableSpec driver, CoefficientField coeffs, double T)
{
    driver.validate();
    require(T > 0.0, "Model: horizon T must be positive");
    require(driver.dim == coeffs.dim, "Model: driver and coefficient dimensions disagree");
    require(driver.spectral.C1() > 0.0 && std::isfinite(driver.spectral.C2()),
            "Model: the spectral non-degeneracy constants must be finite and positive");
    Model m{std::move(driver), std::move(coeffs), T};
    if (m.driver.alpha <= 1.0) {
        // for alpha <= 1 the effective drift must vanish identically
        const auto& c = m.coeffs;
        for (int i = 0; i < c.probe_points; ++i) {
            double x = -c.probe_half_width + 2.0 * c.probe_half_width * i / (c.probe_points - 1);
            Vec xv = Vec::Constant(c.dim, x);
            Vec Bx = c.b_vec(xv) + c.f_mat(xv) * m.driver.gamma;
            require(Bx.norm() <= 1e-12,
                    "Model: alpha <= 1 requires B(x) = b(x) + f(x) gamma = 0, violated at x = " +
                        std::to_string(x));
        }
    }
    return m;
}

double Model::B(double x, int k) const
{
    return coeffs.b.d(x, k) + coeffs.f.d(x, k) * driver.gamma[0];
}

double Model::jump_scale(double x) const
{
    return base_scale() * std::pow(std::abs(coeffs.f(x)), driver.alpha);
}

bool Model::constant_coefficients() const
{
    if (coeffs.dim != 1) return false;
    const auto& c = coeffs;
    double b0 = c.b(0.0), f0 = c.f(0.0);
    for (int i = 0; i < c.probe_points; ++i) {
        double x = -c.probe_half_width + 2.0 * c.probe_half_width * i / (c.probe_points - 1);
        if (c.b(x) != b0 || c.f(x) != f0) return false;
    }
    return true;
}

SpectralMeasure frozen_spectral(const Model& model, double y)
{
    return frozen_spectral(model, Vec::Constant(1, y));
}

SpectralMeasure frozen_spectral(const Model& model, const Vec& y)
{
    const SpectralMeasure& base = model.driver.spectral;
    const double a = model.driver.alpha;
    Mat fy = model.coeffs.f_mat(y);
    Eigen::JacobiSVD<Mat> svd(fy);
    double smin = svd.singularValues().minCoeff(), smax = svd.singularValues().maxCoeff();
    require(smin > 1e-300, "frozen_spectral: f(y) is singular (ellipticity fails)");
    SpectralMeasure out = base;
    switch (base.kind()) {
    case SpectralMeasure::Kind::OneDim:
        out = SpectralMeasure::one_dim(base.scale() * std::pow(std::abs(fy(0, 0)), a), a);
        break;
    case SpectralMeasure::Kind::Discrete: {
        std::vector<Vec> atoms;
        std::vector<double> w;
        for (std::size_t i = 0; i < base.atoms().size(); ++i) {
            Vec img = fy * base.atoms()[i];
            double n = img.norm();
            atoms.push_back(img / n);
            w.push_back(base.weights()[i] * std::pow(n, a));
        }
        out = SpectralMeasure::discrete(atoms, w, a);
        break;
    }
    case SpectralMeasure::Kind::Isotropic: {
        // only conformal f keeps the image isotropic
        require(smax - smin <= 1e-12 * smax, "frozen_spectral: image of an isotropic measure under a "
                                             "non-conformal f(y) is not supported");
        out = SpectralMeasure::isotropic(base.dim(), base.coefficient() * std::pow(smin, a), a);
        break;
    }
    }
    double lo = base.C1() * std::pow(smin, a), hi = base.C2() * std::pow(smax, a);
    require(out.C1() >= lo * (1.0 - 1e-6) && out.C2() <= hi * (1.0 + 1e-6),
            "frozen_spectral: image-measure bounds violated");
    return out;
}

double SampledFunction::operator()(double x) const
{
    if (x >= lo && x <= hi) return value(x);
    switch (tail.kind) {
    case TailLaw::Kind::Zero: return 0.0;
    case TailLaw::Kind::Power: {
        double r = std::abs(x - tail.center);
        double c = x > hi ? tail.c_plus : tail.c_minus;
        double d = x > hi ? tail.d_plus : tail.d_minus;
        double v = c * std::pow(r, -tail.kappa);
        if (tail.kappa2 > 0.0) v += d * std::pow(r, -tail.kappa2);
        return v;
    }
    case TailLaw::Kind::Bounded: return value(x);
    }
    return 0.0;
}

namespace {

// integral over r in [r0, inf) of g(x + sgn r) r^(-1-alpha), with x + sgn r0 at the window's edge
double tail_piece(double alpha, const SampledFunction& g, double x, double sgn, double r0, double tol)
{
    const TailLaw& tl = g.tail;
    switch (tl.kind) {
    case TailLaw::Kind::Zero: return 0.0;
    case TailLaw::Kind::Power: {
        // r = r0 / v; each term c r^-k gives c r0^-alpha v^(alpha-1+k) (r0 + v s(x - center))^-k
        double d = sgn * (x - tl.center);
        auto piece = [&](double c, double k) {
            if (c == 0.0) return 0.0;
            auto F = [&](double v) { return std::pow(v, alpha - 1.0 + k) * std::pow(r0 + v * d, -k); };
            return c * std::pow(r0, -alpha) * integrate_gl(F, 0.0, 1.0, 64);
        };
        double s = piece(sgn > 0 ? tl.c_plus : tl.c_minus, tl.kappa);
        if (tl.kappa2 > 0.0) s += piece(sgn > 0 ? tl.d_plus : tl.d_minus, tl.kappa2);
        return s;
    }
    case TailLaw::Kind::Bounded: {
        double neglected = tl.bound * std::pow(r0, -alpha) / alpha;
        if (neglected > tol) {
            double need = std::pow(tl.bound / (alpha * tol), 1.0 / alpha);
            throw Error("apply_generator: window too narrow for the tail tolerance; need half-width >= " +
                        std::to_string(std::abs(x - tl.center) + need));
        }
        return 0.0;
    }
    }
    return 0.0;
}

double one_side_outer(double alpha, const SampledFunction& g, double x, double sgn, double tol)
{
    // integral over [1, inf) of g(x + sgn r) r^(-1-alpha)
    double edge = sgn > 0 ? g.hi - x : x - g.lo;
    require(edge < 1e9, "fractional_part: the sampling window [lo, hi] must be finite");
    double inside = 0.0;
    if (edge > 1.0) {
        auto F = [&](double r) { return g.value(x + sgn * r) * std::pow(r, -1.0 - alpha); };
        // split geometrically so long windows do not starve the adaptive rule
        double a = 1.0;
        while (a < edge) {
            double b = std::min({edge, 2.0 * a, a + 2.0});
            inside += integrate_adaptive(F, a, b, 0.25 * tol, 40);
            a = b;
        }
    }
    double r0 = std::max(edge, 1.0);
    return inside + tail_piece(alpha, g, x, sgn, r0, 0.25 * tol);
}

} // namespace

double fractional_part(double alpha, const SampledFunction& g, double x, const GeneratorOptions& opt)
{
    require(alpha > 0.0 && alpha < 2.0, "fractional_part: alpha must lie in (0,2)");
    const double norm = 1.0 / (2.0 * c_alpha(alpha));
    const double tol = opt.abs_tol / norm;
    const double gx = g(x);
    const double r0 = opt.taylor_radius;

    // [0, r0]: second-order Taylor, D(r) ~ g''(x) r^2
    double g2;
    if (g.d2) {
        g2 = g.d2(x);
    } else {
        double e = 1e-3;
        g2 = (g(x + e) + g(x - e) - 2.0 * gx) / (e * e);
    }
    double inner0 = g2 * std::pow(r0, 2.0 - alpha) / (2.0 - alpha);

    // [r0, 1] in s = log r
    auto Fs = [&](double s) {
        double r = std::exp(s);
        return (g(x + r) + g(x - r) - 2.0 * gx) * std::exp(-alpha * s);
    };
    double inner = integrate_adaptive(Fs, std::log(r0), 0.0, 0.25 * tol, 40);

    double outer = one_side_outer(alpha, g, x, +1.0, tol) + one_side_outer(alpha, g, x, -1.0, tol) -
                   2.0 * gx / alpha;
    return norm * (inner0 + inner + outer);
}

namespace {

double generator_with(double B, double c, double alpha, const SampledFunction& g, double x,
                      const GeneratorOptions& opt)
{
    double drift = 0.0;
    if (B != 0.0) {
        double g1;
        if (g.d1) {
            g1 = g.d1(x);
        } else {
            double e = 1e-5;
            g1 = (g(x + e) - g(x - e)) / (2.0 * e);
        }
        drift = B * g1;
    }
    return drift + c * fractional_part(alpha, g, x, opt);
}

} // namespace

double apply_generator(const Model& model, const SampledFunction& g, double x, const GeneratorOptions& opt)
{
    require(model.coeffs.dim == 1, "apply_generator: only d = 1 is supported");
    return generator_with(model.B(x), model.jump_scale(x), model.alpha(), g, x, opt);
}

double apply_frozen_generator(const Model& model, const SampledFunction& g, double x, double xi,
                              const GeneratorOptions& opt)
{
    require(model.coeffs.dim == 1, "apply_frozen_generator: only d = 1 is supported");
    return generator_with(model.B(xi), model.jump_scale(xi), model.alpha(), g, x, opt);
}

} // namespace stabsde
