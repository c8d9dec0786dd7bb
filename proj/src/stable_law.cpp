#include "stabsde/stable_law.hpp"

#include "stabsde/quadrature.hpp"

#include <cmath>
#include <limits>

namespace stabsde {

double c_alpha(double alpha)
{
    require(alpha > 0.0 && alpha < 2.0, "c_alpha: alpha must lie in (0,2)");
    if (std::abs(alpha - 1.0) < 1e-12) return pi / 2.0;
    return std::tgamma(1.0 - alpha) * std::cos(pi * alpha / 2.0) / alpha;
}

double isotropic_moment(int dim, double alpha)
{
    require(dim >= 1, "isotropic_moment: dim must be positive");
    if (dim == 1) return 1.0;
    // s_1 = cos(theta) with density proportional to sin(theta)^(d-2) on [0, pi]; use symmetry.
    const GaussRule& g = gauss_legendre(2000);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 2000; ++i) {
        double th = 0.25 * pi * (g.nodes[i] + 1.0);
        double w = g.weights[i] * std::pow(std::sin(th), dim - 2);
        num += w * std::pow(std::cos(th), alpha);
        den += w;
    }
    return num / den;
}

SpectralMeasure SpectralMeasure::one_dim(double c, double alpha)
{
    require(c > 0.0, "SpectralMeasure: OneDim scale must be positive");
    require(alpha > 0.0 && alpha < 2.0, "SpectralMeasure: alpha must lie in (0,2)");
    SpectralMeasure m;
    m.kind_ = Kind::OneDim;
    m.dim_ = 1;
    m.alpha_ = alpha;
    m.c_ = c;
    m.C1_ = m.C2_ = c;
    return m;
}

SpectralMeasure SpectralMeasure::discrete(const std::vector<Vec>& atoms,
                                          const std::vector<double>& weights, double alpha)
{
    require(!atoms.empty() && atoms.size() == weights.size(),
            "SpectralMeasure: atoms and weights must be non-empty and of equal length");
    require(alpha > 0.0 && alpha < 2.0, "SpectralMeasure: alpha must lie in (0,2)");
    SpectralMeasure m;
    m.kind_ = Kind::Discrete;
    m.dim_ = static_cast<int>(atoms.front().size());
    m.alpha_ = alpha;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        require(atoms[i].size() == m.dim_, "SpectralMeasure: atoms of mixed dimension");
        require(std::abs(atoms[i].norm() - 1.0) <= 1e-12, "SpectralMeasure: atom off the unit sphere");
        require(weights[i] > 0.0, "SpectralMeasure: weights must be positive");
    }
    std::vector<bool> used(atoms.size(), false);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (used[i]) continue;
        bool found = false;
        for (std::size_t j = i + 1; j < atoms.size() && !found; ++j) {
            if (used[j]) continue;
            if ((atoms[i] + atoms[j]).norm() <= 1e-12 && std::abs(weights[i] - weights[j]) <= 1e-12 * weights[i]) {
                used[i] = used[j] = true;
                found = true;
            }
        }
        require(found, "SpectralMeasure: discrete measure is not symmetric (missing mirror atom)");
    }
    m.atoms_ = atoms;
    m.weights_ = weights;
    for (auto& a : m.atoms_) a /= a.norm();
    m.compute_bounds();
    return m;
}

SpectralMeasure SpectralMeasure::isotropic(int dim, double coefficient, double alpha)
{
    require(dim >= 1, "SpectralMeasure: dim must be positive");
    require(coefficient > 0.0, "SpectralMeasure: isotropic coefficient must be positive");
    require(alpha > 0.0 && alpha < 2.0, "SpectralMeasure: alpha must lie in (0,2)");
    SpectralMeasure m;
    m.kind_ = Kind::Isotropic;
    m.dim_ = dim;
    m.alpha_ = alpha;
    m.iso_coef_ = coefficient;
    m.iso_mass_ = coefficient / isotropic_moment(dim, alpha);
    m.C1_ = m.C2_ = coefficient;
    return m;
}

double SpectralMeasure::total_mass() const
{
    switch (kind_) {
    case Kind::OneDim: return c_;
    case Kind::Isotropic: return iso_mass_;
    case Kind::Discrete: {
        double s = 0.0;
        for (double w : weights_) s += w;
        return s;
    }
    }
    return 0.0;
}

double SpectralMeasure::exponent(const Vec& u) const
{
    require(u.size() == dim_, "SpectralMeasure::exponent: dimension mismatch");
    switch (kind_) {
    case Kind::OneDim: return c_ * std::pow(std::abs(u[0]), alpha_);
    case Kind::Isotropic: return iso_coef_ * std::pow(u.norm(), alpha_);
    case Kind::Discrete: {
        double s = 0.0;
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            s += weights_[i] * std::pow(std::abs(atoms_[i].dot(u)), alpha_);
        return s;
    }
    }
    return 0.0;
}

void SpectralMeasure::compute_bounds()
{
    // Discrete only: min/max of the exponent over a fine set of unit directions.
    std::vector<Vec> dirs;
    if (dim_ == 1) {
        dirs.push_back(Vec::Ones(1));
    } else if (dim_ == 2) {
        const int n = 7200;
        for (int i = 0; i < n; ++i) {
            double th = pi * i / n;
            Vec p(2);
            p << std::cos(th), std::sin(th);
            dirs.push_back(p);
        }
    } else if (dim_ == 3) {
        const int n = 40000;
        const double ga = pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < n; ++i) {
            double z = 1.0 - (i + 0.5) / n;
            double r = std::sqrt(1.0 - z * z);
            Vec p(3);
            p << r * std::cos(ga * i), r * std::sin(ga * i), z;
            dirs.push_back(p);
        }
    } else {
        Stream rng(0x5eedULL, "spectral-bounds", static_cast<std::uint64_t>(dim_));
        for (int i = 0; i < 40000; ++i) {
            Vec p(dim_);
            for (int k = 0; k < dim_; ++k) p[k] = rng.normal();
            dirs.push_back(p / p.norm());
        }
        for (int k = 0; k < dim_; ++k) dirs.push_back(Vec::Unit(dim_, k));
    }
    C1_ = std::numeric_limits<double>::infinity();
    C2_ = 0.0;
    for (const Vec& p : dirs) {
        double e = exponent(p);
        C1_ = std::min(C1_, e);
        C2_ = std::max(C2_, e);
    }
    require(C1_ > 0.0, "SpectralMeasure: degenerate measure (C1 = 0)");
}

StableSpec StableSpec::one_dim(double alpha, double c, double gamma)
{
    StableSpec s;
    s.alpha = alpha;
    s.spectral = SpectralMeasure::one_dim(c, alpha);
    s.gamma = Vec::Constant(1, gamma);
    s.dim = 1;
    s.validate();
    return s;
}

void StableSpec::validate() const
{
    require(alpha > 0.0 && alpha < 2.0, "StableSpec: alpha must lie in the open interval (0,2)");
    require(spectral.alpha() == alpha, "StableSpec: spectral measure built for a different alpha");
    require(spectral.dim() == dim && gamma.size() == dim, "StableSpec: dimension mismatch");
}

double draw_standard(double alpha, Stream& rng)
{
    double v = pi * (rng.uniform() - 0.5);
    if (alpha == 1.0) return std::tan(v);
    double w = rng.exponential();
    double cv = std::cos(v);
    return std::sin(alpha * v) / std::pow(cv, 1.0 / alpha) *
           std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
}

Vec sample_1d(double alpha, double scale, Stream& rng, Eigen::Index n)
{
    require(alpha > 0.0 && alpha < 2.0, "sample_1d: alpha must lie in (0,2)");
    require(scale > 0.0, "sample_1d: scale must be positive");
    require(n >= 1, "sample_1d: n must be at least 1");
    Vec x(n);
    double s = std::pow(scale, 1.0 / alpha);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = s * draw_standard(alpha, rng);
    return x;
}

double draw_positive_stable(double beta, Stream& rng)
{
    // Kanter's representation.
    double u = rng.uniform();
    double w = rng.exponential();
    double a = std::pow(std::sin(beta * pi * u), beta / (1.0 - beta)) * std::sin((1.0 - beta) * pi * u) /
               std::pow(std::sin(pi * u), 1.0 / (1.0 - beta));
    return std::pow(a / w, (1.0 - beta) / beta);
}

Mat sample_vector(const StableSpec& spec, double t, Stream& rng, Eigen::Index n)
{
    spec.validate();
    require(t > 0.0, "sample_vector: t must be positive");
    const int d = spec.dim;
    const double a = spec.alpha;
    Mat out(d, n);
    const SpectralMeasure& m = spec.spectral;
    switch (m.kind()) {
    case SpectralMeasure::Kind::OneDim: {
        double s = std::pow(t * m.scale(), 1.0 / a);
        for (Eigen::Index i = 0; i < n; ++i) out(0, i) = s * draw_standard(a, rng);
        break;
    }
    case SpectralMeasure::Kind::Discrete: {
        // fold mirrored pairs: one 1D draw with coefficient 2w along each pair
        std::vector<int> rep;
        std::vector<double> coef;
        const auto& at = m.atoms();
        const auto& wt = m.weights();
        std::vector<bool> used(at.size(), false);
        for (std::size_t i = 0; i < at.size(); ++i) {
            if (used[i]) continue;
            for (std::size_t j = i + 1; j < at.size(); ++j) {
                if (!used[j] && (at[i] + at[j]).norm() <= 1e-12) {
                    used[j] = true;
                    break;
                }
            }
            used[i] = true;
            rep.push_back(static_cast<int>(i));
            coef.push_back(std::pow(2.0 * wt[i] * t, 1.0 / a));
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec z = Vec::Zero(d);
            for (std::size_t k = 0; k < rep.size(); ++k) z += coef[k] * draw_standard(a, rng) * at[rep[k]];
            out.col(i) = z;
        }
        break;
    }
    case SpectralMeasure::Kind::Isotropic: {
        // sub-Gaussian: A^(1/2) G, G ~ N(0, 2 (t m)^(2/alpha) I)
        double sg = std::sqrt(2.0) * std::pow(t * m.coefficient(), 1.0 / a);
        for (Eigen::Index i = 0; i < n; ++i) {
            double A = draw_positive_stable(0.5 * a, rng);
            double r = std::sqrt(A) * sg;
            for (int k = 0; k < d; ++k) out(k, i) = r * rng.normal();
        }
        break;
    }
    }
    for (Eigen::Index i = 0; i < n; ++i) out.col(i) += t * spec.gamma;
    return out;
}

std::complex<double> cf(const StableSpec& spec, double t, const Vec& u)
{
    require(t >= 0.0, "cf: t must be non-negative");
    double e = spec.spectral.exponent(u);
    return std::exp(std::complex<double>(-t * e, t * spec.gamma.dot(u)));
}

} // namespace stabsde
