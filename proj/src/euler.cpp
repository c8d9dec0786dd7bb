#include "stabsde/euler.hpp"

#include "stabsde/parallel.hpp"
#include "stabsde/quadrature.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stabsde {

int GridSpec::finest() const
{
    int m = 1;
    for (int f : nesting) m = std::max(m, f);
    return N * m;
}

void GridSpec::validate() const
{
    require(N >= 1, "GridSpec: N must be at least 1");
    require(T > 0.0, "GridSpec: T must be positive");
    require(!nesting.empty(), "GridSpec: nesting list is empty");
    int fin = finest();
    for (int f : nesting) {
        require(f >= 1, "GridSpec: refinement factors must be positive");
        require(fin % (N * f) == 0, "GridSpec: refinement factors must nest evenly in the finest grid");
    }
}

PathBundle simulate_bundle(const Model& model, const GridSpec& grid, const Vec& x0, long n_paths,
                           std::uint64_t seed, std::uint64_t stream, const SimulationOptions& opt)
{
    grid.validate();
    require(n_paths >= 1, "simulate_bundle: n_paths must be positive");
    require(x0.size() == model.coeffs.dim, "simulate_bundle: x0 has the wrong dimension");
    const int d = model.coeffs.dim;
    const int L = static_cast<int>(grid.nesting.size());
    const int fin = grid.finest();
    const double hf = grid.T / fin;
    const double a = model.alpha();

    PathBundle b;
    b.seed = seed;
    b.stream = stream;
    std::vector<int> stride(L);
    for (int l = 0; l < L; ++l) {
        b.steps.push_back(grid.N * grid.nesting[l]);
        stride[l] = fin / b.steps[l];
        b.terminal.push_back(Mat(d, n_paths));
        b.overflow.emplace_back(n_paths, 0);
        if (opt.keep_paths) b.paths.emplace_back(n_paths);
    }
    const std::string tag = "euler/" + std::to_string(stream);

    parallel_for(0, n_paths, [&](long p) {
        Stream rng(seed, tag, static_cast<std::uint64_t>(p));
        std::vector<Vec> X(L, x0), acc(L, Vec::Zero(d));
        std::vector<Mat> path;
        if (opt.keep_paths) {
            for (int l = 0; l < L; ++l) {
                path.emplace_back(d, b.steps[l] + 1);
                path[l].col(0) = x0;
            }
        }
        std::vector<std::uint8_t> flag(L, 0);
        const double s1 = (d == 1) ? std::pow(hf * model.base_scale(), 1.0 / a) : 0.0;
        Vec dz(d);
        for (int i = 0; i < fin; ++i) {
            if (d == 1) {
                dz[0] = s1 * draw_standard(a, rng) + model.driver.gamma[0] * hf;
            } else {
                dz = sample_vector(model.driver, hf, rng, 1).col(0);
            }
            for (int l = 0; l < L; ++l) {
                acc[l] += dz;
                if ((i + 1) % stride[l] != 0) continue;
                if (!flag[l]) {
                    const double h = stride[l] * hf;
                    if (d == 1) {
                        double x = X[l][0];
                        X[l][0] = x + model.coeffs.b(x) * h + model.coeffs.f(x) * acc[l][0];
                    } else {
                        X[l] = X[l] + model.coeffs.b_vec(X[l]) * h + model.coeffs.f_mat(X[l]) * acc[l];
                    }
                    double m = X[l].cwiseAbs().maxCoeff();
                    if (!(m <= opt.cap)) flag[l] = 1;
                }
                if (opt.keep_paths) path[l].col((i + 1) / stride[l]) = X[l];
                acc[l].setZero();
            }
        }
        for (int l = 0; l < L; ++l) {
            b.terminal[l].col(p) = X[l];
            b.overflow[l][p] = flag[l];
            if (opt.keep_paths) b.paths[l][p] = path[l];
        }
    });
    for (int l = 0; l < L; ++l) {
        long c = 0;
        for (auto f : b.overflow[l]) c += f;
        b.overflow_count.push_back(c);
    }
    return b;
}

std::string model_hash(const Model& model)
{
    std::ostringstream s;
    s.precision(17);
    s << model.coeffs.description << '|' << model.alpha() << '|' << model.T << '|' << model.driver.dim << '|'
      << model.driver.spectral.total_mass() << '|' << model.driver.gamma.transpose();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s.str()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_bundle(const PathBundle& b, const Model& model, const std::string& stem)
{
    std::ofstream bin(stem + ".f64", std::ios::binary);
    require(static_cast<bool>(bin), "write_bundle: cannot open " + stem + ".f64");
    for (const Mat& m : b.terminal) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                double v = m(i, j);
                std::uint64_t u;
                std::memcpy(&u, &v, 8);
                if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
                bin.write(reinterpret_cast<const char*>(&u), 8);
            }
        }
    }
    std::ofstream meta(stem + ".txt", std::ios::binary);
    meta << "format = float64-le, level-major, column-major dim x n_paths\n";
    meta << "seed = " << b.seed << "\n";
    meta << "stream = " << b.stream << "\n";
    meta << "model_hash = " << model_hash(model) << "\n";
    meta << "dim = " << model.coeffs.dim << "\n";
    meta << "n_paths = " << (b.terminal.empty() ? 0 : b.terminal.front().cols()) << "\n";
    meta << "levels =";
    for (int s : b.steps) meta << ' ' << s;
    meta << "\noverflow =";
    for (long c : b.overflow_count) meta << ' ' << c;
    meta << "\n";
}

TailFitter density_tail_fitter(const Model& model, const UniformGrid& ug, double x0, const DensityGridSpec& dg)
{
    const double a = model.alpha();
    return TailFitter::make(ug, 1.0 + a, x0, dg.tail_fraction, dg.tail_correction ? 1.0 + 2.0 * a : 0.0);
}

DensityGridSpec default_density_grid(const Model& model, double x0, double h_min)
{
    const double a = model.alpha();
    const double c1 = std::pow(model.base_scale(), 1.0 / a);
    DensityGridSpec s;
    s.center = x0;
    s.half_width = std::max(20.0 * std::pow(model.T, 1.0 / a) * model.coeffs.f_sup * c1, 10.0);
    double sigma_min = model.coeffs.c_lower * c1 * std::pow(h_min, 1.0 / a);
    int n = std::max(2048, static_cast<int>(std::ceil(2.0 * s.half_width / sigma_min)) + 1);
    while ((n - 1) % 8 != 0) ++n;
    s.points = n;
    return s;
}

void exterior_rule(const UniformGrid& grid, double center, int sgn, double resolve, Vec& z, Vec& w)
{
    const double edge = sgn > 0 ? grid.hi() : grid.lo;
    const double L = std::max(40.0 * resolve, 20.0 * grid.step);
    const int M = static_cast<int>(std::ceil(L / grid.step));
    const GaussRule& g = gauss_legendre(48);
    z.resize(M + 1 + 48);
    w.resize(M + 1 + 48);
    for (int m = 0; m <= M; ++m) {
        z[m] = edge + sgn * m * grid.step;
        w[m] = (m == 0 || m == M) ? 0.5 * grid.step : grid.step;
    }
    const double R = std::abs(edge + sgn * M * grid.step - center);
    for (int q = 0; q < 48; ++q) {
        double s = 0.5 * (g.nodes[q] + 1.0);
        z[M + 1 + q] = center + sgn * R / s;
        w[M + 1 + q] = 0.5 * g.weights[q] * R / (s * s);
    }
}

TransitionOperator::TransitionOperator(const Model& model, const UniformGrid& grid, double h,
                                       const TailFitter& fitter)
    : fitter_(fitter)
{
    const int n = grid.n;
    E_.resize(n, n);
    const Vec w = grid.trapezoid_weights();
    parallel_for(0, n, [&](long j) {
        const double z = grid.x(static_cast<int>(j));
        const FrozenLaw law = frozen_law(model, z);
        const double sg = law.sigma(h);
        for (int i = 0; i < n; ++i) E_(i, j) = w[j] * law.density_given(h, sg, z, grid.x(i));
    });
    const double su = model.coeffs.f_sup * std::pow(model.base_scale() * h, 1.0 / model.alpha());
    const double resolve = su + model.coeffs.b_sup * h;
    for (int sgn : {+1, -1}) {
        Vec zq, wq;
        exterior_rule(grid, fitter.center, sgn, resolve, zq, wq);
        Vec k = Vec::Zero(n), k2 = Vec::Zero(n);
        for (Eigen::Index q = 0; q < zq.size(); ++q) {
            const FrozenLaw law = frozen_law(model, zq[q]);
            const double sg = law.sigma(h);
            double r = std::abs(zq[q] - fitter.center);
            double tv = wq[q] * std::pow(r, -fitter.kappa);
            double tv2 = fitter.kappa2 > 0.0 ? wq[q] * std::pow(r, -fitter.kappa2) : 0.0;
            for (int i = 0; i < n; ++i) {
                double p = law.density_given(h, sg, zq[q], grid.x(i));
                k[i] += tv * p;
                k2[i] += tv2 * p;
            }
        }
        (sgn > 0 ? kp_ : km_) = k;
        (sgn > 0 ? kp2_ : km2_) = k2;
    }
}

Vec TransitionOperator::apply(const Vec& v) const
{
    PowerTail t = fitter_.fit(v);
    Vec out = E_ * v;
    out += t.c_plus * kp_ + t.c_minus * km_;
    if (fitter_.kappa2 > 0.0) out += t.d_plus * kp2_ + t.d_minus * km2_;
    return out;
}

DensityGrid propagate_density(const Model& model, const GridSpec& grid, double x0, const DensityGridSpec& dg,
                              PropagationTrace* trace)
{
    UniformGrid ug = UniformGrid::centered(dg.center, dg.half_width, dg.points);
    TailFitter fit = density_tail_fitter(model, ug, x0, dg);
    TransitionOperator op(model, ug, grid.h(), fit);
    return propagate_density(model, grid, x0, ug, op, dg, trace);
}

DensityGrid propagate_density(const Model& model, const GridSpec& grid, double x0, const UniformGrid& ug,
                              const TransitionOperator& op, const DensityGridSpec& dg, PropagationTrace* trace,
                              std::vector<Vec>* snapshots)
{
    require(model.coeffs.dim == 1, "propagate_density: only d = 1 is supported");
    grid.validate();
    const double h = grid.h();
    const TailFitter& fit = op.fitter();
    const FrozenLaw l0 = frozen_law(model, x0);
    Vec v(ug.n);
    for (int i = 0; i < ug.n; ++i) v[i] = l0.density(h, x0, ug.x(i));
    const Vec w = ug.trapezoid_weights();
    for (int k = 1; k <= grid.N; ++k) {
        if (k > 1) v = op.apply(v);
        double mass = w.dot(v) + fit.fit(v).mass(ug);
        if (trace) trace->mass.push_back(mass);
        if (snapshots) snapshots->push_back(v);
        if (mass < 1.0 - dg.tail_budget)
            throw Error("propagate_density: mass " + std::to_string(mass) + " fell below 1 - tail_budget at step " +
                        std::to_string(k));
    }
    DensityGrid out;
    out.grid = ug;
    out.values = v;
    out.tail = fit.fit(v);
    out.t = grid.T;
    out.x0 = x0;
    out.alpha = model.alpha();
    out.N = grid.N;
    return out;
}

} // namespace stabsde
