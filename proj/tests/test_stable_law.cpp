#include "stabsde/stable_law.hpp"

#include <doctest.h>

#include <cmath>

using namespace stabsde;

namespace {

std::complex<double> empirical_cf(const Mat& s, const Vec& u)
{
    std::complex<double> acc = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        const double ph = u.dot(s.col(j));
        acc += std::complex<double>(std::cos(ph), std::sin(ph));
    }
    return acc / static_cast<double>(s.cols());
}

} // namespace

TEST_CASE("radial constant matches the closed form")
{
    for (double a : {0.5, 0.7, 1.3, 1.5, 1.9}) {
        const double closed = std::tgamma(1.0 - a) * std::cos(pi * a / 2.0) / a;
        CHECK(c_alpha(a) == doctest::Approx(closed).epsilon(1e-10));
    }
    CHECK(c_alpha(1.0) == doctest::Approx(pi / 2.0).epsilon(1e-10));
}

TEST_CASE("one-dimensional draws reproduce the characteristic function")
{
    const long n = 100000;
    for (double a : {0.7, 1.0, 1.5}) {
        const StableSpec s = StableSpec::one_dim(a, 0.8);
        Stream rng(7, "cf", 0);
        const Mat x = sample_vector(s, 0.5, rng, n);
        for (double u : {0.2, 0.5, 1.0, 2.0, 4.0}) {
            Vec uv(1);
            uv << u;
            const auto e = empirical_cf(x, uv);
            CHECK(std::abs(e - cf(s, 0.5, uv)) < 4.0 / std::sqrt(double(n)));
        }
    }
}

TEST_CASE("nonzero gamma shifts by t gamma")
{
    const StableSpec s = StableSpec::one_dim(1.5, 1.0, 0.3);
    Vec u(1);
    u << 1.2;
    const auto v = cf(s, 2.0, u);
    CHECK(std::arg(v) == doctest::Approx(2.0 * 0.3 * 1.2).epsilon(1e-12));
    CHECK(std::abs(v) == doctest::Approx(std::exp(-2.0 * std::pow(1.2, 1.5))).epsilon(1e-12));
}

TEST_CASE("isotropic and discrete drivers in two dimensions")
{
    const long n = 60000;
    StableSpec s;
    s.alpha = 1.5;
    s.dim = 2;
    s.gamma = Vec::Zero(2);
    s.spectral = SpectralMeasure::isotropic(2, 1.0, 1.5);
    Stream rng(11, "iso", 0);
    const Mat x = sample_vector(s, 1.0, rng, n);
    for (auto [a, b] : {std::pair{0.5, 0.0}, std::pair{0.0, 1.0}, std::pair{0.7, -0.7}}) {
        Vec u(2);
        u << a, b;
        CHECK(std::abs(empirical_cf(x, u) - std::exp(-std::pow(u.norm(), 1.5))) < 4.0 / std::sqrt(double(n)));
    }
    std::vector<Vec> atoms;
    for (auto [a, b] : {std::pair{1.0, 0.0}, std::pair{-1.0, 0.0}, std::pair{0.0, 1.0}, std::pair{0.0, -1.0}}) {
        Vec e(2);
        e << a, b;
        atoms.push_back(e);
    }
    s.spectral = SpectralMeasure::discrete(atoms, {0.5, 0.5, 0.5, 0.5}, 1.5);
    Stream rng2(11, "axes", 0);
    const Mat y = sample_vector(s, 1.0, rng2, n);
    Vec u(2);
    u << 0.6, 0.8;
    CHECK(std::abs(empirical_cf(y, u) - cf(s, 1.0, u)) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("positive stable variables have the stated Laplace transform")
{
    Stream rng(3, "pos", 0);
    const long n = 100000;
    const double beta = 0.75;
    for (double s : {0.5, 1.0, 2.0}) {
        double acc = 0.0;
        Stream r = rng;
        for (long i = 0; i < n; ++i) acc += std::exp(-s * draw_positive_stable(beta, r));
        CHECK(std::abs(acc / n - std::exp(-std::pow(s, beta))) < 4.0 / std::sqrt(double(n)));
    }
}

TEST_CASE("streams are reproducible and distinct")
{
    Stream a(5, "tag", 1), b(5, "tag", 1), c(5, "tag", 2), d(5, "other", 1);
    const double va = a.uniform();
    CHECK(va == b.uniform());
    CHECK(va != c.uniform());
    CHECK(va != d.uniform());
    CHECK(derive_seed(5, "tag", 1) == derive_seed(5, "tag", 1));
}

TEST_CASE("invalid parameters are rejected")
{
    CHECK_THROWS_AS(StableSpec::one_dim(2.0, 1.0).validate(), Error);
    CHECK_THROWS_AS(StableSpec::one_dim(1.5, -1.0).validate(), Error);
}
