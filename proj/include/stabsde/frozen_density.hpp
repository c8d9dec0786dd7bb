#pragma once

#include "stabsde/common.hpp"
#include "stabsde/model.hpp"

#include <vector>

namespace stabsde {

// Standard symmetric alpha-stable density S (CF exp(-|u|^alpha)) and its
// derivatives. Values come from a dense table built once per alpha by Fourier
// inversion, with the classical tail series used beyond the switch point.
class StableFunctions {
public:
    static constexpr int max_table_order = 4;

    static const StableFunctions& get(double alpha);
    explicit StableFunctions(double alpha);

    double alpha() const { return alpha_; }

    // a-th derivative of S at w
    double s(int a, double w) const;
    double density(double w) const { return s(0, w); }
    // S(w) and S'(w) together
    void s01(double w, double& s0, double& s1) const;
    // inverse transform of |v|^alpha e^{-|v|^alpha}: (S + w S') / alpha, and its derivative
    double kappa(double w) const;
    double kappa1(double w) const;

    // Direct adaptive Gauss-Legendre inversion; no table.
    double direct(int a, double w) const;
    // Tail expansion sum_k; returns NaN if it has not converged at w.
    double series(int a, double w) const;
    // integral_w^inf S for w >= switch point (series); otherwise numeric
    double upper_tail_mass(double w) const;

    double switch_point() const { return w_switch_; }
    // leading far-field constant Gamma(1+alpha) sin(pi alpha / 2) / pi
    double tail_constant() const;

private:
    double alpha_;
    double w_switch_ = 0.0;
    double step_ = 0.0;
    int n_ = 0;
    std::vector<std::vector<double>> table_;  // orders 0 .. max_table_order + 1
    static constexpr int series_orders = 8;     // a = -1 .. 6
    static constexpr int series_terms = 400;
    std::vector<std::vector<double>> coef_, env_;

    void build_series();

    double series_impl(int a, double w, bool strict) const;
    void build_table();
};

// Frozen law: p~(t, x, z) is the density of x + B t + (c t)^(1/alpha) S.
struct FrozenLaw {
    double alpha = 1.5;
    double c = 1.0;  // frozen jump scale c_{f(y)}
    double B = 0.0;  // frozen drift B(y)
    const StableFunctions* fn = nullptr;

    double sigma(double t) const;
    // a-th z-derivative of p~(t, x, z)
    double density(double t, double x, double z, int a = 0) const;
    // kappa(t, x, z): inverse transform of |u|^alpha e^{-t c |u|^alpha} at z - x - B t
    double kappa(double t, double x, double z) const;
    // p~(t, x, z) with sigma(t) supplied by the caller (hot loops)
    double density_given(double t, double sg, double x, double z) const { return fn->s(0, (z - x - B * t) / sg) / sg; }
};

FrozenLaw frozen_law(const Model& model, double y);
FrozenLaw frozen_law(double alpha, double c, double B);

struct FrozenDensityQuery {
    double y = 0.0;  // freeze point
    double t = 1.0;
    double x = 0.0;  // starting point
    int order = 0;   // z-derivative order
    Vec z;
};

// Values of d^a/dz^a p~^y(t, x, z) at the query points.
Vec eval(const Model& model, const FrozenDensityQuery& q);

struct TailFit {
    double value = 0.0;
    double residual = 0.0;
};

// m = 1: far-field constant of p~ |z - x|^(1+alpha) / t; m = 2: the next coefficient
// in powers of t / |z - x|^alpha.
TailFit tail_coefficient(const Model& model, double y, int m, double t = 1.0);

struct DerivativeBoundReport {
    int order = 0;
    double sup_time = 0.0;    // sup |D^a p~| t^(a/alpha) / p~
    double sup_space = 0.0;   // sup |D^a p~| |z - x - B t|^a / p~
    double sup_time_refined = 0.0;
    double sup_space_refined = 0.0;
    double drift_time = 0.0;  // relative change under grid doubling
    double drift_space = 0.0;
    bool finite = false;
    bool stable = false;
};

DerivativeBoundReport check_derivative_bounds(const Model& model, double y, double t, int a,
                                              double lo, double hi, int n, double x = 0.0);

} // namespace stabsde
