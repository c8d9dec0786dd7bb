#pragma once

#include "stabsde/common.hpp"

#include <functional>
#include <vector>

namespace stabsde {

struct GaussRule {
    Vec nodes;   // on [-1, 1]
    Vec weights;
};

// n-point Gauss-Legendre rule; cached per thread-safe static table.
const GaussRule& gauss_legendre(int n);

// Integrate f over [a, b] with a fixed n-point rule.
double integrate_gl(const std::function<double(double)>& f, double a, double b, int n = 16);

// Adaptive bisection driven by the difference between a 16- and a 32-point rule.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double abs_tol, int max_depth = 30, double rel_tol = 0.0);

// Integral over [0, t] of F(u) where F may blow up like u^(w-1) at u = 0 and like
// (t-u)^(w-1) at u = t. Each half is mapped by v = u^w (resp. v = (t-u)^w) and
// integrated with Gauss-Legendre nodes in v, doubling from n0 until the relative
// change drops below rel_tol.
struct SingularQuadResult {
    double value = 0.0;
    int nodes = 0;
    bool converged = false;
};
SingularQuadResult integrate_endpoint_singular(const std::function<double(double)>& F, double t,
                                               double omega, int n0 = 64, double rel_tol = 1e-6,
                                               int max_nodes = 4096);

// Integral over the real line of an integrand concentrated near the anchor points on
// length scale `scale`: panels refine geometrically towards each anchor and grow
// geometrically outwards until the contributions are negligible.
double integrate_real_line(const std::function<double(double)>& f, std::vector<double> anchors, double scale);

// Nodes/weights of the substituted rule on [0, t] (both halves, n per half).
void endpoint_singular_rule(double t, double omega, int n, Vec& u, Vec& w);

} // namespace stabsde
