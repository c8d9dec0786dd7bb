#pragma once

#include "stabsde/common.hpp"
#include "stabsde/euler.hpp"
#include "stabsde/frozen_density.hpp"
#include "stabsde/grid.hpp"
#include "stabsde/model.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <string>
#include <vector>

namespace stabsde {

// H(t, x, y) = (Phi - Phi~_y) p~^y(t, ., y)(x)
//            = (B(x) - B(y)) d/dx p~^y(t, x, y) - (c_{f(x)} - c_{f(y)}) kappa(t, x, y)
double kernel_H(const Model& model, double t, double x, double y);

// H_N over a lag of m = k - j steps of size h:
// h^-1 [ integral p~^x(h, x, w) p~^y((m-1) h, w, y) dw - p~^y(m h, x, y) ].
// The w-integral is computed by adaptive quadrature on the whole line.
double kernel_HN(const Model& model, double h, int m, double x, double y);

// Kernel acting on grid densities: (K v)(y_i) = integral v(z) k(z, y_i) dz, trapezoid on
// the grid plus the exterior contribution of v's fitted power tail.
class GridKernel {
public:
    GridKernel() = default;
    GridKernel(Mat interior, std::vector<Vec> exterior, const TailFitter* fitter);

    Vec apply(const Vec& v) const;
    // columns of V are densities
    Mat apply(const Mat& V) const;
    const Mat& matrix() const { return M_; }
    bool empty() const { return M_.size() == 0; }

private:
    Mat M_;
    std::vector<Vec> ext_;  // one per tail basis: c+, c-, d+, d-
    const TailFitter* fitter_ = nullptr;
};

// Extended node set: grid nodes plus exterior nodes beyond both edges.
struct ExtendedNodes {
    Vec z, w;
    // tail basis value at each exterior node, per basis (c+, c-, d+, d-)
    std::vector<Vec> basis;
    int n_interior = 0;
};
ExtendedNodes extended_nodes(const UniformGrid& g, const TailFitter& fit, double resolve);

// Builds a GridKernel from k(z, y) evaluated at extended z nodes and grid y nodes.
GridKernel make_grid_kernel(const UniformGrid& g, const TailFitter& fit, const ExtendedNodes& ext,
                            const std::function<double(double z, double y)>& k);

// Singularity record of a kernel family: |K(s)| ~ s^(omega - 1) as s -> 0.
struct KernelField {
    std::function<GridKernel(double s)> at;
    // lim_{s -> 0} of the kernel applied to a smooth density (optional)
    std::function<Vec(const Vec&)> limit0;
    double omega = 1.0;
    double s_resolved = 0.0;  // below this lag the grid does not resolve the kernel
};

KernelField kernel_field_H(const Model& model, const UniformGrid& g, const TailFitter& fit);

enum class ConvolutionKind { Continuous, Discrete };

struct ConvolveDiagnostics {
    int nodes = 0;
    bool converged = true;
    double measured_exponent = 0.0;
    std::string warning;
};

// continuous: integral_0^t du integral dz lhs(u)(z) rhs(t - u, z, y)
// discrete:   h sum_{t_j < t} integral dz lhs(t_j)(z) rhs(t - t_j, z, y)
Vec convolve(ConvolutionKind kind, const std::function<Vec(double)>& lhs, const KernelField& rhs, double t,
             double h = 0.0, ConvolveDiagnostics* diag = nullptr);

// The fractional operator L and the first derivative on a grid, acting on functions
// whose extension beyond the grid is the fitted power tail.
Mat fractional_matrix(double alpha, const UniformGrid& g, const TailFitter& fit);
Eigen::SparseMatrix<double> derivative_matrix(const UniformGrid& g, const TailFitter& fit);

enum class SeriesVariant { P, PD, PN };
SeriesVariant parse_variant(const std::string& s);
std::string variant_name(SeriesVariant v);

struct SeriesOptions {
    SeriesVariant variant = SeriesVariant::P;
    int N = 64;           // time steps for p_d and p_N
    int lag_steps = 64;   // uniform lag grid of the continuous series
    int r_max = 6;
    double rel_stop = 1e-8;
    int r_limit = 80;     // hard ceiling of the automatic extension
    bool record_wall_time = false;
};

struct TermDiagnostic {
    int r = 0;
    double sup_norm = 0.0;
    double mass = 0.0;
    double wall_time_ms = 0.0;
    double envelope = 0.0;  // C^r t^(r omega / 2) / (floor(r/2)!)^2 with C fitted from the first terms
};

struct SeriesResult {
    DensityGrid density;
    std::vector<TermDiagnostic> terms;
    std::vector<Vec> term_values;
    double truncation_estimate = 0.0;
    double min_value = 0.0;
};

// One-shot interface: builds the kernels itself.
SeriesResult series(const Model& model, double t, double x0, const UniformGrid& g, const DensityGridSpec& dg,
                    const SeriesOptions& opt);

// Shared machinery for repeated series evaluations on one grid.
class SeriesEngine {
public:
    SeriesEngine(const Model& model, double t, double x0, const UniformGrid& g, const DensityGridSpec& dg,
                 int lag_steps);

    SeriesResult run(const SeriesOptions& opt);

    const UniformGrid& grid() const { return g_; }
    const TailFitter& fitter() const { return fit_; }
    // lag kernels H(l t / M) for l = 1..M, built on first use
    void ensure_lags();
    const GridKernel& lag_kernel(int l) const { return H_.at(l); }
    // p~^y(t, x0, y) on the grid
    Vec frozen_start(double t) const;
    Vec limit0(const Vec& v) const;

private:
    const Model& model_;
    double t_, x0_;
    UniformGrid g_;
    DensityGridSpec dg_;
    TailFitter fit_;
    ExtendedNodes ext_;
    int M_;
    std::vector<GridKernel> H_;  // index l = 1..M, lag l * t / M
    Mat L_;
    Vec Bp_, c_;
    int x0_index_ = 0;

    std::vector<GridKernel> discrete_kernels(int N);
    SeriesResult assemble(const std::vector<Mat>& terms, const SeriesOptions& opt,
                          const std::vector<double>& wall) const;
};

// Fine-chain ingredients for the M = 2 leading term.
struct LeadingTermOptions {
    int N_fine = 512;
};

// (1/2) p (x) (Phi^2 - Phi~_*^2) p (T, x0, .), per unit h.
DensityGrid leading_term_M2(const Model& model, double T, double x0, const DensityGridSpec& dg,
                            const LeadingTermOptions& opt = {});
// Same on a prebuilt fine chain: snapshots[k] = p^{N_f}(t_{k+1}), op = one fine step.
DensityGrid leading_term_M2(const Model& model, double T, double x0, const UniformGrid& g,
                            const TransitionOperator& op, const std::vector<Vec>& snapshots);

} // namespace stabsde
