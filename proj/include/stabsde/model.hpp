#pragma once

#include "stabsde/common.hpp"
#include "stabsde/stable_law.hpp"

#include <functional>
#include <string>

namespace stabsde {

// Scalar map with derivative oracles: eval(x, k) returns the k-th derivative.
struct ScalarFn {
    std::function<double(double, int)> eval;
    int max_order = 4;

    double operator()(double x) const { return eval(x, 0); }
    double d(double x, int k) const;
};

struct Preset {
    std::string kind = "constant";  // constant | tanh | sine
    double level = 0.0;
    double amp = 0.0;
    double width = 1.0;  // tanh: level + amp * width * tanh(x / width)
    double freq = 1.0;   // sine: level + amp * sin(freq * x + phase)
    double phase = 0.0;
};

ScalarFn make_preset(const Preset& p);

struct CoefficientField {
    int dim = 1;
    ScalarFn b, f;  // d = 1
    std::function<Vec(const Vec&)> b_vec;
    std::function<Mat(const Vec&)> f_mat;
    int q = 12;
    double b_sup = 0.0, f_sup = 0.0;
    double c_lower = 0.0, c_upper = 0.0;  // ellipticity on the probe grid
    double probe_half_width = 50.0;
    int probe_points = 2001;
    std::string description;

    static CoefficientField one_dim(ScalarFn b, ScalarFn f, int q = 12, double probe_half_width = 50.0);
    static CoefficientField multi_dim(int dim, std::function<Vec(const Vec&)> b,
                                      std::function<Mat(const Vec&)> f, int q = 12,
                                      double probe_half_width = 10.0);
    static CoefficientField constant(double b0, double f0);
};

struct Model {
    StableSpec driver;
    CoefficientField coeffs;
    double T = 1.0;

    // Validates dimensions, the non-degeneracy constants and the zero effective drift for alpha <= 1.
    static Model make(StableSpec driver, CoefficientField coeffs, double T);

    double alpha() const { return driver.alpha; }
    double base_scale() const { return driver.spectral.scale(); }
    // B(x) = b(x) + f(x) gamma and its derivatives (d = 1)
    double B(double x, int k = 0) const;
    // c_{f(x)} = c |f(x)|^alpha (d = 1)
    double jump_scale(double x) const;
    bool constant_coefficients() const;
};

SpectralMeasure frozen_spectral(const Model& model, const Vec& y);
SpectralMeasure frozen_spectral(const Model& model, double y);

// Function sampled on [lo, hi] with a declared law beyond the window.
struct TailLaw {
    enum class Kind { Zero, Power, Bounded };
    Kind kind = Kind::Zero;
    double c_minus = 0.0, c_plus = 0.0;  // Power: c / r^kappa + d / r^kappa2, r = |x - center|
    double d_minus = 0.0, d_plus = 0.0;
    double kappa = 2.0;
    double kappa2 = 0.0;  // 0: no correction term
    double center = 0.0;
    double bound = 0.0;  // Bounded: |g| <= bound outside, integrals truncated at the window
};

struct SampledFunction {
    std::function<double(double)> value;
    std::function<double(double)> d1, d2;  // optional oracles
    double lo = -1e300, hi = 1e300;
    TailLaw tail;

    double operator()(double x) const;
};

struct GeneratorOptions {
    double abs_tol = 1e-9;
    double taylor_radius = 1e-4;
};

// Phi g(x) = B(x) g'(x) + c_{f(x)} L g(x), where L is normalised so that
// L e^{iux} = -|u|^alpha e^{iux}.
double apply_generator(const Model& model, const SampledFunction& g, double x,
                       const GeneratorOptions& opt = {});
double apply_frozen_generator(const Model& model, const SampledFunction& g, double x, double xi,
                              const GeneratorOptions& opt = {});

// (1 / (2 C_alpha)) integral_0^inf [g(x+r) + g(x-r) - 2 g(x)] r^(-1-alpha) dr
double fractional_part(double alpha, const SampledFunction& g, double x, const GeneratorOptions& opt = {});

} // namespace stabsde
