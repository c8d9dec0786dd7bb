#include "stabsde/parametrix.hpp"
#include "stabsde/quadrature.hpp"

#include <doctest.h>

#include <cmath>

using namespace stabsde;

namespace {

Model gap_model(double T = 1.0)
{
    return Model::make(StableSpec::one_dim(1.5, 1.0),
                       CoefficientField::one_dim(make_preset({"tanh", 0.0, 0.5, 1.0, 1.0, 0.0}),
                                                 make_preset({"sine", 1.0, 0.25, 1.0, 1.0, 0.0})),
                       T);
}

} // namespace

TEST_CASE("endpoint-singular quadrature")
{
    const double w = 2.0 / 3.0;
    const auto r = integrate_endpoint_singular([&](double u) { return std::pow(u, w - 1.0); }, 1.0, w, 64, 1e-9);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(1.5).epsilon(1e-9));
    const auto s = integrate_endpoint_singular(
        [&](double u) { return std::pow(u, w - 1.0) * std::pow(1.0 - u, w - 1.0); }, 1.0, w);
    const double beta = std::tgamma(w) * std::tgamma(w) / std::tgamma(2.0 * w);
    CHECK(s.value == doctest::Approx(beta).epsilon(1e-8));
}

TEST_CASE("kernels vanish for constant coefficients")
{
    const Model m = Model::make(StableSpec::one_dim(1.5, 1.0), CoefficientField::constant(0.3, 0.9), 1.0);
    for (double x : {-1.0, 0.0, 2.0})
        for (double y : {-0.5, 0.7}) {
            CHECK(kernel_H(m, 0.3, x, y) == 0.0);
            CHECK(std::abs(kernel_HN(m, 0.125, 3, x, y)) < 1e-9);
        }
}

TEST_CASE("discrete kernel tends to the continuous one")
{
    const Model m = gap_model();
    const double t = 0.5, x = 0.3, y = -0.4;
    const double H = kernel_H(m, t, x, y);
    double prev = 0.0;
    std::vector<double> err;
    for (int m_steps : {4, 8, 16}) {
        const double h = t / m_steps;
        err.push_back(std::abs(kernel_HN(m, h, m_steps, x, y) - H));
        prev = err.back();
    }
    CHECK(prev < 0.05 * std::abs(H) + 1e-6);
    CHECK(err[0] / err[1] == doctest::Approx(2.0).epsilon(0.3));
    CHECK(err[1] / err[2] == doctest::Approx(2.0).epsilon(0.3));
}

TEST_CASE("fractional matrix reproduces minus kappa")
{
    const FrozenLaw l = frozen_law(1.5, 1.0, 0.0);
    const UniformGrid g = UniformGrid::centered(0.0, 20.0, 1601);
    const TailFitter fit = TailFitter::make(g, 2.5, 0.0, 0.0);
    Vec p(g.n), k(g.n);
    for (int i = 0; i < g.n; ++i) {
        p[i] = l.density(0.5, 0.0, g.x(i));
        k[i] = l.kappa(0.5, 0.0, g.x(i));
    }
    const Mat L = fractional_matrix(1.5, g, fit);
    const Vec r = L * p + k;
    CHECK(r.cwiseAbs().maxCoeff() / k.cwiseAbs().maxCoeff() < 1e-4);
    const auto D = derivative_matrix(g, fit);
    Vec d1(g.n);
    for (int i = 0; i < g.n; ++i) d1[i] = l.density(0.5, 0.0, g.x(i), 1);
    CHECK((D * p - d1).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("series variants reduce to the frozen density for constant coefficients")
{
    const Model m = Model::make(StableSpec::one_dim(1.5, 1.0), CoefficientField::constant(0.2, 1.0), 1.0);
    DensityGridSpec dg = default_density_grid(m, 0.0, 1.0 / 64);
    const UniformGrid g = UniformGrid::centered(dg.center, dg.half_width, dg.points).coarsen(4);
    const FrozenLaw l = frozen_law(m, 0.0);
    for (SeriesVariant v : {SeriesVariant::P, SeriesVariant::PD, SeriesVariant::PN}) {
        SeriesOptions o;
        o.variant = v;
        o.N = 8;
        o.lag_steps = 16;
        const SeriesResult r = series(m, 1.0, 0.0, g, dg, o);
        double worst = 0.0;
        for (int i = 0; i < g.n; ++i) worst = std::max(worst, std::abs(r.density.values[i] - l.density(1.0, 0.0, g.x(i))));
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("variant names")
{
    CHECK(parse_variant("p") == SeriesVariant::P);
    CHECK(parse_variant("p_d") == SeriesVariant::PD);
    CHECK(parse_variant("p_N") == SeriesVariant::PN);
    CHECK(variant_name(SeriesVariant::PN) == "p_N");
    CHECK_THROWS_AS(parse_variant("q"), Error);
}

TEST_CASE("p_N equals direct Euler propagation on a short horizon")
{
    const Model m = gap_model(0.25);
    DensityGridSpec dg = default_density_grid(m, 0.0, 0.25 / 16);
    dg.half_width = 12.0;
    dg.points = 961;
    const UniformGrid g = UniformGrid::centered(dg.center, dg.half_width, dg.points);
    SeriesOptions o;
    o.variant = SeriesVariant::PN;
    o.N = 4;
    const SeriesResult r = series(m, 0.25, 0.0, g, dg, o);
    CHECK(r.terms.size() <= 5);  // r = 0 .. N
    const TailFitter fit = density_tail_fitter(m, g, 0.0, dg);
    GridSpec gs{4, 0.25, {1}};
    TransitionOperator op(m, g, gs.h(), fit);
    const DensityGrid e = propagate_density(m, gs, 0.0, g, op, dg);
    CHECK((r.density.values - e.values).cwiseAbs().maxCoeff() / e.values.maxCoeff() < 1e-3);
}
