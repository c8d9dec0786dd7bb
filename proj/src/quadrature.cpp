#include "stabsde/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace stabsde {

namespace {

GaussRule build_rule(int n)
{
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Tricomi initial guess, then Newton on P_n.
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    return r;
}

} // namespace

const GaussRule& gauss_legendre(int n)
{
    require(n >= 1, "gauss_legendre: n must be positive");
    static std::mutex mu;
    static std::map<int, std::unique_ptr<GaussRule>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<GaussRule>(build_rule(n));
    return *slot;
}

double integrate_gl(const std::function<double(double)>& f, double a, double b, int n)
{
    const GaussRule& g = gauss_legendre(n);
    double m = 0.5 * (a + b), r = 0.5 * (b - a), s = 0.0;
    for (int i = 0; i < n; ++i) s += g.weights[i] * f(m + r * g.nodes[i]);
    return s * r;
}

namespace {

double adaptive_rec(const std::function<double(double)>& f, double a, double b, double tol,
                    double rel_tol, int depth, double coarse)
{
    double fine = integrate_gl(f, a, b, 32);
    double err = std::abs(fine - coarse);
    if (err <= tol || err <= rel_tol * std::abs(fine) || depth <= 0) return fine;
    double m = 0.5 * (a + b);
    double l = integrate_gl(f, a, m, 16), r = integrate_gl(f, m, b, 16);
    return adaptive_rec(f, a, m, 0.5 * tol, rel_tol, depth - 1, l) +
           adaptive_rec(f, m, b, 0.5 * tol, rel_tol, depth - 1, r);
}

} // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double abs_tol, int max_depth, double rel_tol)
{
    if (a == b) return 0.0;
    return adaptive_rec(f, a, b, abs_tol, rel_tol, max_depth, integrate_gl(f, a, b, 16));
}

void endpoint_singular_rule(double t, double omega, int n, Vec& u, Vec& w)
{
    require(t > 0.0 && omega > 0.0 && omega <= 1.0, "endpoint_singular_rule: bad arguments");
    const GaussRule& g = gauss_legendre(n);
    u.resize(2 * n);
    w.resize(2 * n);
    double vmax = std::pow(0.5 * t, omega);
    double p = 1.0 / omega;
    for (int i = 0; i < n; ++i) {
        double v = 0.5 * vmax * (g.nodes[i] + 1.0);
        double jac = 0.5 * vmax * g.weights[i] * p * std::pow(v, p - 1.0);
        double s = std::pow(v, p);
        u[i] = s;          // near 0
        w[i] = jac;
        u[n + i] = t - s;  // near t
        w[n + i] = jac;
    }
}

SingularQuadResult integrate_endpoint_singular(const std::function<double(double)>& F, double t,
                                               double omega, int n0, double rel_tol, int max_nodes)
{
    SingularQuadResult res;
    double prev = 0.0;
    bool have_prev = false;
    for (int n = n0; n <= max_nodes; n *= 2) {
        Vec u, w;
        endpoint_singular_rule(t, omega, n, u, w);
        double s = 0.0;
        for (Eigen::Index i = 0; i < u.size(); ++i) s += w[i] * F(u[i]);
        res.value = s;
        res.nodes = n;
        if (have_prev && std::abs(s - prev) <= rel_tol * std::abs(s)) {
            res.converged = true;
            return res;
        }
        prev = s;
        have_prev = true;
    }
    return res;
}

namespace {

// Breakpoints between a and b refined geometrically towards both ends on scale s.
void add_panels(std::vector<double>& out, double a, double b, double s)
{
    const double mid = 0.5 * (a + b);
    std::vector<double> right;
    for (double d = s; a + d < mid; d *= 2.0) {
        out.push_back(a + d);
        right.push_back(b - d);
    }
    out.push_back(mid);
    out.insert(out.end(), right.rbegin(), right.rend());
    out.push_back(b);
}

} // namespace

double integrate_real_line(const std::function<double(double)>& f, std::vector<double> anchors, double scale)
{
    require(!anchors.empty() && scale > 0.0, "integrate_real_line: need an anchor and a positive scale");
    std::sort(anchors.begin(), anchors.end());
    std::vector<double> bp{anchors.front()};
    for (size_t i = 1; i < anchors.size(); ++i) {
        if (anchors[i] - bp.back() > 1e-12 * scale) add_panels(bp, bp.back(), anchors[i], scale);
    }
    double total = 0.0;
    for (size_t i = 1; i < bp.size(); ++i) total += integrate_gl(f, bp[i - 1], bp[i], 32);
    for (int sgn : {-1, +1}) {
        const double edge = sgn < 0 ? bp.front() : bp.back();
        double d = 0.0;
        for (double len = scale; len < 1e9 * scale; len *= 2.0) {
            const double a = edge + sgn * d, b = edge + sgn * (d + len);
            const double piece = integrate_gl(f, std::min(a, b), std::max(a, b), 32);
            total += piece;
            d += len;
            if (len > 64.0 * scale && std::abs(piece) < 1e-17 * std::max(std::abs(total), 1e-300)) break;
        }
    }
    return total;
}

} // namespace stabsde
