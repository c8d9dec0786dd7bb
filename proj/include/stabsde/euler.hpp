#pragma once

#include "stabsde/common.hpp"
#include "stabsde/frozen_density.hpp"
#include "stabsde/grid.hpp"
#include "stabsde/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stabsde {

struct GridSpec {
    int N = 8;
    double T = 1.0;
    std::vector<int> nesting{1};  // level k uses N * nesting[k] steps

    double h() const { return T / N; }
    int finest() const;
    void validate() const;
};

struct PathBundle {
    std::vector<int> steps;               // per level
    std::vector<Mat> terminal;            // per level, dim x n_paths
    std::vector<std::vector<Mat>> paths;  // optional: per level, per path, dim x (steps + 1)
    std::vector<std::vector<std::uint8_t>> overflow;  // per level, per path
    std::vector<long> overflow_count;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

struct SimulationOptions {
    double cap = 1e12;  // |X| above the cap is flagged, never clipped
    bool keep_paths = false;
};

PathBundle simulate_bundle(const Model& model, const GridSpec& grid, const Vec& x0, long n_paths,
                           std::uint64_t seed, std::uint64_t stream = 0, const SimulationOptions& opt = {});

// Terminal values as little-endian float64 (level-major) plus a text sidecar.
void write_bundle(const PathBundle& b, const Model& model, const std::string& stem);

std::string model_hash(const Model& model);

struct DensityGridSpec {
    double center = 0.0;
    double half_width = 25.0;
    int points = 2049;
    double tail_fraction = 0.05;
    double tail_budget = 1e-3;
    double per_step_tol = 1e-5;
    bool tail_correction = true;  // add the d / r^(1 + 2 alpha) term to the fitted tail
};

TailFitter density_tail_fitter(const Model& model, const UniformGrid& ug, double x0, const DensityGridSpec& dg);

// Default grid: half-width max(20 T^(1/alpha) sup|f| c^(1/alpha), 10) around x0, at
// least 2048 points, refined so the spacing does not exceed the smallest
// one-step scale min|f| c^(1/alpha) h_min^(1/alpha) (n - 1 kept divisible by 8, so the centre survives 4x coarsening).
DensityGridSpec default_density_grid(const Model& model, double x0, double h_min);

// One Euler step acting on densities: (A v)(y) = integral v(z) p~^z(h, z, y) dz,
// trapezoid on the grid plus the exterior contribution of the fitted power tail.
class TransitionOperator {
public:
    TransitionOperator(const Model& model, const UniformGrid& grid, double h, const TailFitter& fitter);

    Vec apply(const Vec& v) const;
    const Mat& matrix() const { return E_; }
    const Vec& k_plus() const { return kp_; }
    const Vec& k_minus() const { return km_; }
    const TailFitter& fitter() const { return fitter_; }

private:
    Mat E_;
    Vec kp_, km_, kp2_, km2_;
    TailFitter fitter_;
};

// Exterior nodes/weights beyond one edge (sgn = +1 right, -1 left) used for tail integrals
// whose integrand is resolved on scale `resolve`.
void exterior_rule(const UniformGrid& grid, double center, int sgn, double resolve, Vec& z, Vec& w);

struct PropagationTrace {
    std::vector<double> mass;  // after each step
};

DensityGrid propagate_density(const Model& model, const GridSpec& grid, double x0, const DensityGridSpec& dg,
                              PropagationTrace* trace = nullptr);
// Same, reusing a prebuilt operator; snapshots (optional) receive p^N(t_k) for k = 1..N.
DensityGrid propagate_density(const Model& model, const GridSpec& grid, double x0, const UniformGrid& ug,
                              const TransitionOperator& op, const DensityGridSpec& dg,
                              PropagationTrace* trace = nullptr, std::vector<Vec>* snapshots = nullptr);

} // namespace stabsde
