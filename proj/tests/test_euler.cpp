#include "stabsde/euler.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace stabsde;

namespace {

Model constant_model(double b0, double f0)
{
    return Model::make(StableSpec::one_dim(1.5, 1.0), CoefficientField::constant(b0, f0), 1.0);
}

Model gap_model()
{
    return Model::make(StableSpec::one_dim(1.5, 1.0),
                       CoefficientField::one_dim(make_preset({"tanh", 0.0, 0.5, 1.0, 1.0, 0.0}),
                                                 make_preset({"sine", 1.0, 0.25, 1.0, 1.0, 0.0})),
                       1.0);
}

} // namespace

TEST_CASE("constant coefficients: terminal law is the driver law")
{
    const Model m = constant_model(0.3, 0.8);
    const long n = 100000;
    const PathBundle b = simulate_bundle(m, GridSpec{8, 1.0, {1}}, Vec::Constant(1, 0.0), n, 42);
    for (double u : {0.3, 1.0, 2.0}) {
        std::complex<double> e = 0.0;
        for (long p = 0; p < n; ++p) e += std::exp(std::complex<double>(0.0, u * b.terminal[0](0, p)));
        e /= double(n);
        const std::complex<double> want = std::exp(std::complex<double>(-std::pow(0.8 * u, 1.5), 0.3 * u));
        CHECK(std::abs(e - want) < 4.0 / std::sqrt(double(n)));
    }
}

TEST_CASE("levels are driven by the same increments")
{
    const Model m = constant_model(0.2, 1.1);
    const PathBundle b = simulate_bundle(m, GridSpec{4, 1.0, {1, 2, 8}}, Vec::Constant(1, 0.5), 2000, 9);
    REQUIRE(b.terminal.size() == 3);
    CHECK(b.steps == std::vector<int>{4, 8, 32});
    CHECK((b.terminal[0] - b.terminal[2]).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((b.terminal[1] - b.terminal[2]).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("simulation is deterministic in the seed")
{
    const Model m = gap_model();
    const PathBundle a = simulate_bundle(m, GridSpec{8, 1.0, {1, 2}}, Vec::Constant(1, 0.0), 500, 1);
    const PathBundle b = simulate_bundle(m, GridSpec{8, 1.0, {1, 2}}, Vec::Constant(1, 0.0), 500, 1);
    const PathBundle c = simulate_bundle(m, GridSpec{8, 1.0, {1, 2}}, Vec::Constant(1, 0.0), 500, 2);
    CHECK(a.terminal[1] == b.terminal[1]);
    CHECK(a.terminal[1] != c.terminal[1]);
}

TEST_CASE("overflow is flagged, not clipped")
{
    const Model m = gap_model();
    SimulationOptions o;
    o.cap = 2.0;
    const PathBundle b = simulate_bundle(m, GridSpec{8, 1.0, {1}}, Vec::Constant(1, 0.0), 5000, 3, 0, o);
    long flagged = 0;
    for (long p = 0; p < 5000; ++p) {
        flagged += b.overflow[0][p];
        if (!b.overflow[0][p]) CHECK(std::abs(b.terminal[0](0, p)) <= 2.0);
    }
    CHECK(flagged > 0);
    CHECK(flagged == b.overflow_count[0]);
}

TEST_CASE("bundle binary and sidecar")
{
    const Model m = gap_model();
    const PathBundle b = simulate_bundle(m, GridSpec{8, 1.0, {1}}, Vec::Constant(1, 0.0), 16, 3);
    const auto dir = std::filesystem::temp_directory_path() / "stabsde_bundle_test";
    std::filesystem::create_directories(dir);
    const std::string stem = (dir / "b").string();
    write_bundle(b, m, stem);
    CHECK(std::filesystem::file_size(stem + ".f64") == 16 * sizeof(double));
    CHECK(std::filesystem::exists(stem + ".txt"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("density propagation is exact for constant coefficients")
{
    const Model m = constant_model(0.4, 0.9);
    DensityGridSpec dg = default_density_grid(m, 0.0, 1.0 / 8);
    PropagationTrace tr;
    const DensityGrid d = propagate_density(m, GridSpec{8, 1.0, {1}}, 0.0, dg, &tr);
    const FrozenLaw l = frozen_law(m, 0.0);
    double worst = 0.0;
    for (int i = 0; i < d.grid.n; ++i) worst = std::max(worst, std::abs(d.values[i] - l.density(1.0, 0.0, d.grid.x(i))));
    CHECK(worst < 1e-6);
    REQUIRE(tr.mass.size() == 8);
    for (double v : tr.mass) CHECK(std::abs(v - 1.0) < 1e-5 * 8);
}

TEST_CASE("grid density agrees with Monte Carlo on the gap model")
{
    const Model m = gap_model();
    const DensityGridSpec dg = default_density_grid(m, 0.0, 1.0 / 8);
    const DensityGrid d = propagate_density(m, GridSpec{8, 1.0, {1}}, 0.0, dg);
    const long n = 100000;
    const PathBundle b = simulate_bundle(m, GridSpec{8, 1.0, {1}}, Vec::Constant(1, 0.0), n, 5);
    // P(X in [-1, 1]) from both
    double mc = 0.0;
    for (long p = 0; p < n; ++p) mc += std::abs(b.terminal[0](0, p)) <= 1.0;
    mc /= n;
    const Vec w = d.grid.trapezoid_weights();
    double grid = 0.0;
    for (int i = 0; i < d.grid.n; ++i)
        if (std::abs(d.grid.x(i)) <= 1.0 + 1e-12) grid += w[i] * d.values[i];
    CHECK(std::abs(mc - grid) < 4.0 * std::sqrt(mc * (1 - mc) / n) + 2.0 * d.grid.step);
}
