#include "stabsde/frozen_density.hpp"

#include "stabsde/quadrature.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>
#include <mutex>

namespace stabsde {

namespace {

constexpr int table_orders = StableFunctions::max_table_order + 2;  // values 0..5
constexpr double trunc_log = 39.2;  // e^{-U^alpha} U^a <= 1e-17

double truncation_point(double alpha, int a)
{
    double u = 1.0;
    for (int i = 0; i < 200; ++i) u = std::pow(trunc_log + a * std::log(std::max(u, 1.0)), 1.0 / alpha);
    return u;
}

// Panel boundaries on [0, U]: geometric grading towards 0, then widths <= wmax.
std::vector<double> panels(double U, double wmax)
{
    std::vector<double> edges;
    double u1 = std::min(wmax, U);
    for (int k = 52; k >= 1; --k) edges.push_back(u1 * std::ldexp(1.0, -k));
    edges.push_back(u1);
    int m = static_cast<int>(std::ceil((U - u1) / wmax));
    for (int i = 1; i <= m; ++i) edges.push_back(u1 + (U - u1) * i / m);
    return edges;
}

double sign_for(int a) { return (a % 2 == 0) ? ((a / 2) % 2 == 0 ? 1.0 : -1.0) : (((a + 1) / 2) % 2 == 0 ? 1.0 : -1.0); }

} // namespace

const StableFunctions& StableFunctions::get(double alpha)
{
    static std::mutex mu;
    static std::map<double, std::unique_ptr<StableFunctions>> cache;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(alpha);
        if (it != cache.end()) return *it->second;
    }
    // build outside the lock; identical tables are produced by any racing builder
    auto fresh = std::make_unique<StableFunctions>(alpha);
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[alpha];
    if (!slot) slot = std::move(fresh);
    return *slot;
}

StableFunctions::StableFunctions(double alpha) : alpha_(alpha)
{
    require(alpha > 0.0 && alpha < 2.0, "StableFunctions: alpha must lie in (0,2)");
    build_series();
    // smallest w where the tail series converges cleanly for every order we serve
    w_switch_ = 0.0;
    for (double w = 1.5; w <= 400.0; w += 0.5) {
        bool ok = true;
        for (int a = 0; a <= 6 && ok; ++a) ok = std::isfinite(series_impl(a, w, true));
        ok = ok && std::isfinite(series_impl(-1, w, true));
        if (ok) {
            w_switch_ = w;
            break;
        }
    }
    require(w_switch_ > 0.0, "StableFunctions: tail series never converges for alpha = " + std::to_string(alpha));
    build_table();
}

double StableFunctions::tail_constant() const
{
    return std::tgamma(1.0 + alpha_) * std::sin(pi * alpha_ / 2.0) / pi;
}

void StableFunctions::build_series()
{
    // S(w) = (1/pi) sum_k (-1)^(k+1) Gamma(k alpha + 1) / k! sin(k pi alpha / 2) w^(-k alpha - 1), w > 0.
    // Order a >= 0 differentiates termwise; a = -1 integrates over [w, inf).
    coef_.assign(series_orders, std::vector<double>(series_terms, 0.0));
    env_.assign(series_orders, std::vector<double>(series_terms, 0.0));
    for (int a = -1; a < series_orders - 1; ++a) {
        for (int k = 1; k <= series_terms; ++k) {
            double ka = k * alpha_;
            double sk = std::sin(k * pi * alpha_ / 2.0);
            if (std::abs(sk) < 1e-13) sk = 0.0;
            double lmag = std::lgamma(ka + 1.0) - std::lgamma(k + 1.0);
            double factor = 1.0;
            if (a >= 0) {
                for (int i = 1; i <= a; ++i) factor *= (ka + i);
                if (a % 2 == 1) factor = -factor;
            } else {
                factor = 1.0 / ka;
            }
            double sign = (k % 2 == 1) ? 1.0 : -1.0;
            // exp(lmag) can overflow for large k; those terms are never reached
            double mag = lmag > 700.0 ? std::numeric_limits<double>::infinity() : std::exp(lmag);
            coef_[a + 1][k - 1] = sign * sk * mag * factor / pi;
            env_[a + 1][k - 1] = mag * std::abs(factor) / pi;
        }
    }
}

double StableFunctions::series_impl(int a, double w, bool strict) const
{
    const std::vector<double>& c = coef_[a + 1];
    const std::vector<double>& env = env_[a + 1];
    const double r = std::exp(-alpha_ * std::log(w));
    double pw = r;
    if (a >= 0) {
        const double iw = 1.0 / w;
        for (int i = 0; i <= a; ++i) pw *= iw;
    }
    double sum = 0.0, abs_sum = 0.0, prev = std::numeric_limits<double>::infinity();
    int small = 0;
    if (!strict) {
        for (int k = 0; k < series_terms; ++k, pw *= r) {
            sum += c[k] * pw;
            if (env[k] * pw <= 1e-17 * std::abs(sum)) {
                if (++small >= 2) break;
            } else {
                small = 0;
            }
        }
        return sum;
    }
    for (int k = 0; k < series_terms; ++k, pw *= r) {
        double term = c[k] * pw;
        double mag = env[k] * pw;  // sine-free envelope drives the stopping rule
        if (!std::isfinite(mag)) return std::numeric_limits<double>::quiet_NaN();
        if (mag > prev) {
            if (strict) return std::numeric_limits<double>::quiet_NaN();
        }
        prev = mag;
        sum += term;
        abs_sum += mag;
        if (mag <= 1e-17 * std::abs(sum)) {
            if (++small >= 2) {
                if (strict && abs_sum > 100.0 * std::abs(sum)) return std::numeric_limits<double>::quiet_NaN();
                return sum;
            }
        } else {
            small = 0;
        }
    }
    return strict ? std::numeric_limits<double>::quiet_NaN() : sum;
}

double StableFunctions::series(int a, double w) const
{
    double aw = std::abs(w);
    double v = series_impl(a, aw, false);
    return (w < 0 && a % 2 == 1) ? -v : v;
}

double StableFunctions::direct(int a, double w) const
{
    require(a >= 0, "StableFunctions::direct: negative order");
    const double aw = std::abs(w);
    const double U = truncation_point(alpha_, a);
    const double wmax = aw > 0.0 ? std::min(1.0, pi / (4.0 * aw)) : 1.0;
    const std::vector<double> e = panels(U, wmax);
    const bool even = (a % 2 == 0);
    auto F = [&](double u) {
        double base = std::pow(u, a) * std::exp(-std::pow(u, alpha_));
        return base * (even ? std::cos(u * aw) : std::sin(u * aw));
    };
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < e.size(); ++i) s += integrate_adaptive(F, e[i], e[i + 1], 1e-19, 8, 1e-14);
    double v = sign_for(a) * s / pi;
    return (w < 0 && !even) ? -v : v;
}

void StableFunctions::build_table()
{
    step_ = alpha_ < 1.0 ? 0.0025 : 0.005;
    n_ = static_cast<int>(std::ceil(w_switch_ / step_)) + 2;
    table_.assign(table_orders, std::vector<double>(n_, 0.0));

    double U = 0.0;
    for (int a = 0; a < table_orders; ++a) U = std::max(U, truncation_point(alpha_, a));
    const double wspan = step_ * (n_ - 1);
    const std::vector<double> e = panels(U, std::min(1.0, pi / (4.0 * wspan)));
    const GaussRule& g = gauss_legendre(20);

    std::vector<double> amp(table_orders);
    for (std::size_t p = 0; p + 1 < e.size(); ++p) {
        double m = 0.5 * (e[p] + e[p + 1]), r = 0.5 * (e[p + 1] - e[p]);
        for (int q = 0; q < 20; ++q) {
            double u = m + r * g.nodes[q];
            double base = r * g.weights[q] * std::exp(-std::pow(u, alpha_));
            for (int a = 0; a < table_orders; ++a) amp[a] = base * std::pow(u, a);
            const std::complex<double> rot = std::polar(1.0, u * step_);
            std::complex<double> z(1.0, 0.0);
            for (int j = 0; j < n_; ++j) {
                if (j % 64 == 0) z = std::polar(1.0, u * step_ * j);
                double c = z.real(), s = z.imag();
                for (int a = 0; a < table_orders; a += 2) table_[a][j] += amp[a] * c;
                for (int a = 1; a < table_orders; a += 2) table_[a][j] += amp[a] * s;
                z *= rot;
            }
        }
    }
    for (int a = 0; a < table_orders; ++a)
        for (int j = 0; j < n_; ++j) table_[a][j] *= sign_for(a) / pi;
}

double StableFunctions::s(int a, double w) const
{
    require(a >= 0, "StableFunctions::s: negative order");
    const double aw = std::abs(w);
    const double flip = (w < 0 && a % 2 == 1) ? -1.0 : 1.0;
    if (aw >= w_switch_) return flip * series_impl(a, aw, false);
    if (a > max_table_order) return direct(a, w);
    // cubic Hermite on the table using the next order as slope
    double x = aw / step_;
    int j = static_cast<int>(x);
    if (j >= n_ - 1) j = n_ - 2;
    double t = x - j;
    const std::vector<double>& f = table_[a];
    const std::vector<double>& d = table_[a + 1];
    double t2 = t * t, t3 = t2 * t;
    double v = (2 * t3 - 3 * t2 + 1) * f[j] + (t3 - 2 * t2 + t) * step_ * d[j] + (-2 * t3 + 3 * t2) * f[j + 1] +
               (t3 - t2) * step_ * d[j + 1];
    return flip * v;
}

void StableFunctions::s01(double w, double& s0, double& s1) const
{
    const double aw = std::abs(w);
    if (aw >= w_switch_) {
        // both tail series in one pass over the shared powers of w^-alpha
        const std::vector<double>& c0 = coef_[1];
        const std::vector<double>& c1 = coef_[2];
        const std::vector<double>& e0 = env_[1];
        const std::vector<double>& e1 = env_[2];
        const double r = std::exp(-alpha_ * std::log(aw));
        const double iw = 1.0 / aw;
        double pw = r * iw;
        s0 = s1 = 0.0;
        int small = 0;
        for (int k = 0; k < series_terms; ++k, pw *= r) {
            s0 += c0[k] * pw;
            s1 += c1[k] * pw * iw;
            const bool tiny = e0[k] * pw <= 1e-17 * std::abs(s0) && e1[k] * pw * iw <= 1e-17 * std::abs(s1);
            if (tiny) {
                if (++small >= 2) break;
            } else {
                small = 0;
            }
        }
    } else {
        double x = aw / step_;
        int j = static_cast<int>(x);
        if (j >= n_ - 1) j = n_ - 2;
        double t = x - j;
        double t2 = t * t, t3 = t2 * t;
        double h00 = 2 * t3 - 3 * t2 + 1, h10 = (t3 - 2 * t2 + t) * step_, h01 = -2 * t3 + 3 * t2,
               h11 = (t3 - t2) * step_;
        const auto& f0 = table_[0];
        const auto& f1 = table_[1];
        const auto& f2 = table_[2];
        s0 = h00 * f0[j] + h10 * f1[j] + h01 * f0[j + 1] + h11 * f1[j + 1];
        s1 = h00 * f1[j] + h10 * f2[j] + h01 * f1[j + 1] + h11 * f2[j + 1];
    }
    if (w < 0) s1 = -s1;
}

double StableFunctions::kappa(double w) const { return (s(0, w) + w * s(1, w)) / alpha_; }

double StableFunctions::kappa1(double w) const { return (2.0 * s(1, w) + w * s(2, w)) / alpha_; }

double StableFunctions::upper_tail_mass(double w) const
{
    if (w >= w_switch_) return series_impl(-1, w, false);
    if (w <= -w_switch_) return 1.0 - series_impl(-1, -w, false);
    double mid = 0.0;
    int m = std::max(1, static_cast<int>(std::ceil((w_switch_ - w) / 0.25)));
    for (int i = 0; i < m; ++i) {
        double a = w + (w_switch_ - w) * i / m, b = w + (w_switch_ - w) * (i + 1) / m;
        mid += integrate_gl([this](double v) { return s(0, v); }, a, b, 24);
    }
    return mid + series_impl(-1, w_switch_, false);
}

double FrozenLaw::sigma(double t) const { return std::pow(c * t, 1.0 / alpha); }

double FrozenLaw::density(double t, double x, double z, int a) const
{
    double sg = sigma(t);
    double w = (z - x - B * t) / sg;
    double p = fn->s(a, w) / sg;
    for (int i = 0; i < a; ++i) p /= sg;
    return p;
}

double FrozenLaw::kappa(double t, double x, double z) const
{
    double sg = sigma(t);
    double w = (z - x - B * t) / sg;
    return fn->kappa(w) / (c * t * sg);
}

FrozenLaw frozen_law(double alpha, double c, double B)
{
    return FrozenLaw{alpha, c, B, &StableFunctions::get(alpha)};
}

FrozenLaw frozen_law(const Model& model, double y)
{
    require(model.coeffs.dim == 1, "frozen_law: only d = 1 is supported");
    return frozen_law(model.alpha(), model.jump_scale(y), model.B(y));
}

Vec eval(const Model& model, const FrozenDensityQuery& q)
{
    require(q.t >= 1e-6 * model.T, "frozen density: t below t_min = 1e-6 T, inversion ill-conditioned");
    require(q.order >= 0 && q.order < model.coeffs.q - (model.coeffs.dim + 4),
            "frozen density: derivative order outside the validity range a < q - (d + 4)");
    FrozenLaw law = frozen_law(model, q.y);
    Vec out(q.z.size());
    for (Eigen::Index i = 0; i < q.z.size(); ++i) out[i] = law.density(q.t, q.x, q.z[i], q.order);
    return out;
}

TailFit tail_coefficient(const Model& model, double y, int m, double t)
{
    require(m == 1 || m == 2, "tail_coefficient: order m must be 1 or 2");
    FrozenLaw law = frozen_law(model, y);
    const double a = law.alpha;
    const double sg = law.sigma(t);
    const double w0 = std::max(50.0, 2.0 * law.fn->switch_point());
    const int n = 24;
    Mat A(n, 3);
    Vec F(n), xi(n);
    for (int i = 0; i < n; ++i) {
        double w = w0 * std::pow(8.0, static_cast<double>(i) / (n - 1));
        double zeta = w * sg;
        F[i] = law.density(t, 0.0, zeta + law.B * t) * std::pow(zeta, 1.0 + a) / t;
        xi[i] = t / std::pow(zeta, a);
        A(i, 0) = 1.0;
        A(i, 1) = xi[i];
        A(i, 2) = xi[i] * xi[i];
    }
    Vec coef = A.colPivHouseholderQr().solve(F);
    TailFit fit;
    fit.value = coef[m - 1];
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        double model_i = m == 1 ? coef[0] : coef[0] + coef[1] * xi[i];
        worst = std::max(worst, std::abs(F[i] - model_i));
    }
    fit.residual = worst / std::abs(coef[0]);
    require(coef[0] > 0.0, "tail_coefficient: leading far-field constant is not positive");
    require(fit.residual <= 0.05, "tail_coefficient: fit residual above 5%, window too near");
    return fit;
}

DerivativeBoundReport check_derivative_bounds(const Model& model, double y, double t, int a, double lo,
                                              double hi, int n, double x)
{
    require(n >= 3 && hi > lo, "check_derivative_bounds: bad grid");
    FrozenLaw law = frozen_law(model, y);
    auto sweep = [&](int pts, double& st, double& ss) {
        st = ss = 0.0;
        for (int i = 0; i < pts; ++i) {
            double z = lo + (hi - lo) * i / (pts - 1);
            double p = law.density(t, x, z, 0);
            double d = std::abs(law.density(t, x, z, a));
            double zeta = std::abs(z - x - law.B * t);
            st = std::max(st, d * std::pow(t, a / law.alpha) / p);
            ss = std::max(ss, d * std::pow(zeta, a) / p);
        }
    };
    DerivativeBoundReport r;
    r.order = a;
    sweep(n, r.sup_time, r.sup_space);
    sweep(2 * n - 1, r.sup_time_refined, r.sup_space_refined);
    r.finite = std::isfinite(r.sup_time) && std::isfinite(r.sup_space) && std::isfinite(r.sup_time_refined) &&
               std::isfinite(r.sup_space_refined);
    r.drift_time = std::abs(r.sup_time_refined - r.sup_time) / std::max(r.sup_time_refined, 1e-300);
    r.drift_space = std::abs(r.sup_space_refined - r.sup_space) / std::max(r.sup_space_refined, 1e-300);
    r.stable = r.finite && r.drift_time <= 0.02 && r.drift_space <= 0.02;
    return r;
}

} // namespace stabsde
