#include "stabsde/frozen_density.hpp"
#include "stabsde/model.hpp"

#include <doctest.h>

#include <cmath>

using namespace stabsde;

namespace {

Model gap_model()
{
    return Model::make(StableSpec::one_dim(1.5, 1.0),
                       CoefficientField::one_dim(make_preset({"tanh", 0.0, 0.5, 1.0, 1.0, 0.0}),
                                                 make_preset({"sine", 1.0, 0.25, 1.0, 1.0, 0.0})),
                       1.0);
}

} // namespace

TEST_CASE("preset derivatives agree with finite differences")
{
    for (const Preset& p : {Preset{"tanh", 0.1, 0.5, 1.5, 1.0, 0.0}, Preset{"sine", 1.0, 0.25, 1.0, 2.0, 0.3}}) {
        const ScalarFn f = make_preset(p);
        const double x = 0.37, e = 1e-4;
        for (int k = 0; k < 3; ++k) {
            const double fd = (f.d(x + e, k) - f.d(x - e, k)) / (2.0 * e);
            CHECK(f.d(x, k + 1) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("effective drift and jump scale")
{
    const Model m = gap_model();
    CHECK(m.B(0.7) == doctest::Approx(0.5 * std::tanh(0.7)));
    CHECK(m.jump_scale(0.7) == doctest::Approx(std::pow(1.0 + 0.25 * std::sin(0.7), 1.5)));
    CHECK_FALSE(m.constant_coefficients());
    CHECK(m.coeffs.c_lower > 0.0);
}

TEST_CASE("drift is refused when alpha <= 1")
{
    auto cf = CoefficientField::one_dim(make_preset({"tanh", 0.0, 0.5, 1.0, 1.0, 0.0}), make_preset({"constant", 1.0}));
    CHECK_THROWS_AS(Model::make(StableSpec::one_dim(0.7, 1.0), cf, 1.0), Error);
    CHECK_NOTHROW(Model::make(StableSpec::one_dim(0.7, 1.0), CoefficientField::constant(0.0, 1.0), 1.0));
}

TEST_CASE("fractional operator on the stable density is minus kappa")
{
    // L S = -kappa for the standard law; the tail beyond the window is the S power tail
    for (double a : {0.7, 1.5}) {
        const FrozenLaw l = frozen_law(a, 1.0, 0.0);
        SampledFunction g;
        g.value = [&](double x) { return l.density(1.0, 0.0, x); };
        g.d1 = [&](double x) { return l.density(1.0, 0.0, x, 1); };
        g.d2 = [&](double x) { return l.density(1.0, 0.0, x, 2); };
        g.lo = -200.0;
        g.hi = 200.0;
        g.tail.kind = TailLaw::Kind::Power;
        g.tail.kappa = 1.0 + a;
        g.tail.c_minus = g.tail.c_plus = StableFunctions::get(a).tail_constant();
        for (double x : {0.0, 0.4, 3.0}) {
            const double want = -l.kappa(1.0, 0.0, x);
            CHECK(std::abs(fractional_part(a, g, x) - want) < 1e-5 * std::max(1.0, std::abs(want)));
        }
        // generator of the gap model at x: B S' + c L S
        const Model m = gap_model();
        if (a == 1.5) {
            const double x = 0.3;
            const double want = m.B(x) * g.d1(x) - m.jump_scale(x) * l.kappa(1.0, 0.0, x);
            CHECK(apply_generator(m, g, x) == doctest::Approx(want).epsilon(1e-5));
            const double frozen = m.B(1.0) * g.d1(x) - m.jump_scale(1.0) * l.kappa(1.0, 0.0, x);
            CHECK(apply_frozen_generator(m, g, x, 1.0) == doctest::Approx(frozen).epsilon(1e-5));
        }
    }
}

TEST_CASE("infinite windows are refused")
{
    SampledFunction g;
    g.value = [](double) { return 0.0; };
    CHECK_THROWS_AS(fractional_part(1.5, g, 0.0), Error);
}
