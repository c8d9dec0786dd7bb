#pragma once

#include "stabsde/common.hpp"
#include "stabsde/rng.hpp"

#include <complex>
#include <vector>

namespace stabsde {

// Spectral measures are stored in "CF units": the characteristic exponent of the
// driver at time t is t * integral |<s,u>|^alpha lambda(ds), with no extra C_alpha.
class SpectralMeasure {
public:
    enum class Kind { OneDim, Discrete, Isotropic };

    static SpectralMeasure one_dim(double c, double alpha);
    // Atoms are normalised to the sphere after a 1e-12 check; mirrors are required.
    static SpectralMeasure discrete(const std::vector<Vec>& atoms, const std::vector<double>& weights,
                                    double alpha);
    // CF exp(-t * coefficient * |u|^alpha); the lambda total mass is coefficient / A(d, alpha).
    static SpectralMeasure isotropic(int dim, double coefficient, double alpha);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    double alpha() const { return alpha_; }

    // integral |<s,u>|^alpha lambda(ds)
    double exponent(const Vec& u) const;

    // non-degeneracy constants: min / max over unit p of integral |<p,s>|^alpha lambda(ds)
    double C1() const { return C1_; }
    double C2() const { return C2_; }

    double scale() const { return c_; }                    // OneDim
    double coefficient() const { return iso_coef_; }       // Isotropic
    double total_mass() const;
    const std::vector<Vec>& atoms() const { return atoms_; }
    const std::vector<double>& weights() const { return weights_; }

private:
    Kind kind_ = Kind::OneDim;
    int dim_ = 1;
    double alpha_ = 1.0;
    double c_ = 1.0;
    double iso_coef_ = 0.0;
    double iso_mass_ = 0.0;
    std::vector<Vec> atoms_;
    std::vector<double> weights_;
    double C1_ = 0.0, C2_ = 0.0;

    void compute_bounds();
};

struct StableSpec {
    double alpha = 1.5;
    SpectralMeasure spectral = SpectralMeasure::one_dim(1.0, 1.5);
    Vec gamma = Vec::Zero(1);
    int dim = 1;

    static StableSpec one_dim(double alpha, double c, double gamma = 0.0);
    void validate() const;
};

// E|s_1|^alpha for s uniform on the unit sphere of R^d (2000-point Gauss-Legendre in angle).
double isotropic_moment(int dim, double alpha);

// Standard symmetric alpha-stable draws with CF exp(-scale |u|^alpha).
Vec sample_1d(double alpha, double scale, Stream& rng, Eigen::Index n);
double draw_standard(double alpha, Stream& rng);

// Positive (alpha/2)-stable with Laplace transform exp(-s^(alpha/2)).
double draw_positive_stable(double beta, Stream& rng);

// n draws of Z_t, returned as columns of a dim x n matrix.
Mat sample_vector(const StableSpec& spec, double t, Stream& rng, Eigen::Index n);

std::complex<double> cf(const StableSpec& spec, double t, const Vec& u);

// Radial constant C_alpha = integral_0^inf (1 - cos r) r^(-1-alpha) dr.
double c_alpha(double alpha);

} // namespace stabsde
