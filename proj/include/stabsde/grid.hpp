#pragma once

#include "stabsde/common.hpp"
#include "stabsde/model.hpp"

#include <string>

namespace stabsde {

struct UniformGrid {
    double lo = -1.0;
    double step = 1.0;
    int n = 3;

    static UniformGrid centered(double center, double half_width, int n);
    double x(int i) const { return lo + step * i; }
    double hi() const { return lo + step * (n - 1); }
    Vec points() const;
    Vec trapezoid_weights() const;
    // every factor-th node; requires (n - 1) % factor == 0
    UniformGrid coarsen(int factor) const;
};

// c / r^kappa + d / r^kappa2 with r = |x - center|, beyond each edge of the grid.
// kappa2 = 0 switches the correction term off.
struct PowerTail {
    double c_minus = 0.0, c_plus = 0.0;
    double d_minus = 0.0, d_plus = 0.0;
    double kappa = 2.5;
    double kappa2 = 0.0;
    double center = 0.0;

    double operator()(const UniformGrid& g, double x) const;
    // integral of the tail beyond both edges
    double mass(const UniformGrid& g) const;
};

// Least-squares fit of the tail constants on the outermost fraction of nodes;
// the constants are linear functionals c = <a, v> of the grid values.
struct TailFitter {
    Vec a_minus, a_plus;  // leading constants
    Vec b_minus, b_plus;  // correction constants (zero when kappa2 = 0)
    double kappa = 2.5;
    double kappa2 = 0.0;
    double center = 0.0;

    static TailFitter make(const UniformGrid& g, double kappa, double center, double fraction = 0.05,
                           double kappa2 = 0.0);
    PowerTail fit(const Vec& v) const;
};

struct DensityGrid {
    UniformGrid grid;
    Vec values;
    PowerTail tail;
    double t = 0.0;
    double x0 = 0.0;
    double alpha = 0.0;
    int N = 0;

    double mass() const;
    // cubic interpolation inside, power tail outside
    SampledFunction as_function() const;
};

// sum |f| (1 + |y - x0|)^p dy over the grid (trapezoid)
double weighted_l1(const UniformGrid& g, const Vec& f, double x0, double p);
double l1(const UniformGrid& g, const Vec& f);

// RFC-4180 CSV: y, density plus the metadata columns repeated on every row
void write_density_csv(const DensityGrid& d, const std::string& path);
DensityGrid read_density_csv(const std::string& path);

} // namespace stabsde
