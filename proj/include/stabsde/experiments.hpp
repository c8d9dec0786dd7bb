#pragma once

#include "stabsde/config.hpp"
#include "stabsde/convergence.hpp"
#include "stabsde/euler.hpp"
#include "stabsde/grid.hpp"
#include "stabsde/parametrix.hpp"

#include <string>
#include <vector>

namespace stabsde {

// Density grid of an experiment: the config overrides, else the default for the
// smallest step 1 / n_fine, widened so that (points - 1) is divisible by 2 coarsen.
DensityGridSpec experiment_grid(const ExperimentConfig& cfg, const Model& model);

Mat run_sample(const ExperimentConfig& cfg);
DensityGrid run_frozen_density(const ExperimentConfig& cfg);
DensityGrid run_euler_density(const ExperimentConfig& cfg, PropagationTrace* trace = nullptr);
SeriesResult run_parametrix(const ExperimentConfig& cfg);

ConvergenceReport run_weak_error(const ExperimentConfig& cfg);

struct DensityGapResult {
    ConvergenceReport weighted;  // weighted-L1 gaps, weight (1 + |y - x0|)^(1 + alpha)
    ConvergenceReport sup;
    std::vector<double> leading_rel_l1;  // per ladder level: |(p - p^N)/h - LT|_1 / |LT|_1
    double leading_mass = 0.0;
    double route_gap = 0.0;        // series p vs Euler Richardson, relative sup on the series grid
    double chain_gap = 0.0;        // series p_N vs propagate_density at the smallest ladder N, relative sup
    double envelope_inner = 0.0;   // sup |gap| (1 + r^(1+alpha)) over r <= W / 2, smallest h
    double envelope_outer = 0.0;   // same over r > W / 2
    bool envelope_ok = false;
    DensityGrid p_ref, p_series, leading;
    std::vector<DensityGrid> p_N, gap_over_h;
    SeriesResult series;
};

DensityGapResult run_density_gap(const ExperimentConfig& cfg);

struct BoundItem {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double refined = 0.0;  // value under the refined probe grid (when applicable)
    std::string detail;
};

struct BoundSuiteResult {
    std::vector<BoundItem> items;
    bool all_passed() const;
};

BoundSuiteResult run_bound_suite(const ExperimentConfig& cfg);

// |H(t, x, y)| / (p~^y(t, x, y) (1 + min(1, |x - y|) / t)) over the probe product grid
double kernel_ratio_sup(const Model& model, const std::vector<double>& times, double lo, double hi, int n);
// |H (x) H(t, x, y)| / (t^(omega - 1) p~^y(t, x, y)) over probe points y, x = x0
double double_convolution_ratio(const Model& model, double t, double x0, const std::vector<double>& ys);

} // namespace stabsde
