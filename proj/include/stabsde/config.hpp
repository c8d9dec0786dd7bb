#pragma once

#include "stabsde/common.hpp"
#include "stabsde/model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace stabsde {

// Test function g with its growth exponent (0 for bounded g).
struct TestFunction {
    std::string name;
    std::function<double(double)> g;
    double growth = 0.0;
};

// smooth_bounded: 1 / (1 + x^2); lipschitz: min(|x|, cap); indicator: 1{x <= threshold};
// power: |x|^beta, beta < alpha required.
TestFunction make_test_function(const std::string& name, double alpha, double beta, double threshold, double cap);

struct ExperimentConfig {
    // model
    double alpha = 1.5;
    double scale = 1.0;  // driver CF scale c
    double gamma = 0.0;
    int dim = 1;
    std::string spectral = "one_dim";  // one_dim | isotropic | axes (sample command only for d > 1)
    Preset b{"tanh", 0.0, 0.5, 1.0, 1.0, 0.0};
    Preset f{"sine", 1.0, 0.25, 1.0, 1.0, 0.0};
    int q = 12;
    double T = 1.0;
    double x0 = 0.0;

    // experiment
    std::vector<int> ladder{8, 16, 32, 64};
    long n_paths = 200000;
    std::string test_function = "smooth_bounded";
    double g_beta = 0.5;
    double g_threshold = 0.0;
    double g_cap = 1.0;
    std::uint64_t seed = 20240917;
    std::string out_dir = "out";
    int threads = 1;

    // density side
    int n_fine = 512;  // reference chain N_ref for the densities
    int grid_points = 0;
    double grid_half_width = 0.0;
    double tail_fraction = 0.05;
    int lag_steps = 64;
    int r_max = 6;
    std::string variant = "p";
    int N = 16;          // euler-density and the discrete series variants
    double t = 0.0;      // evaluation time for density commands (0: T)
    double freeze = 0.0; // freeze point for the density command
    int coarsen = 4;     // series grid = every coarsen-th node of the density grid
    double gate = 1e-3;
    bool record_wall_time = false;

    // sample
    long n_samples = 100000;

    // report
    std::vector<std::string> report_items{"weak-error", "density-gap", "bound-suite"};

    Model model() const;
    TestFunction test() const;
    double eval_time() const { return t > 0.0 ? t : T; }
    void validate() const;
    // normalised key = value listing, one per line, sorted by key
    std::string echo() const;
};

// Flat "key = value" text with '#' comments; unknown keys are errors.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

} // namespace stabsde
