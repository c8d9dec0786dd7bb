#include "stabsde/parametrix.hpp"

#include "stabsde/parallel.hpp"
#include "stabsde/quadrature.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

namespace stabsde {

namespace {

double lag_resolve(const Model& m, double s)
{
    return m.coeffs.f_sup * std::pow(m.base_scale() * s, 1.0 / m.alpha()) + m.coeffs.b_sup * s;
}

double ms_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

double kernel_H(const Model& model, double t, double x, double y)
{
    require(model.coeffs.dim == 1, "kernel_H: only d = 1 is supported");
    require(t > 0.0 && t <= model.T * (1.0 + 1e-12), "kernel_H: t must lie in (0, T]");
    const FrozenLaw law = frozen_law(model, y);
    const double dx = -law.density(t, x, y, 1);
    return (model.B(x) - law.B) * dx - (model.jump_scale(x) - law.c) * law.kappa(t, x, y);
}

double kernel_HN(const Model& model, double h, int m, double x, double y)
{
    require(model.coeffs.dim == 1, "kernel_HN: only d = 1 is supported");
    require(h > 0.0 && m >= 1, "kernel_HN: needs h > 0 and k > j");
    const FrozenLaw lx = frozen_law(model, x);
    const FrozenLaw ly = frozen_law(model, y);
    if (m == 1) return (lx.density(h, x, y) - ly.density(h, x, y)) / h;
    const double tau = (m - 1) * h;
    auto f = [&](double w) { return lx.density(h, x, w) * ly.density(tau, w, y); };
    const double s = std::min(lx.sigma(h), ly.sigma(tau));
    const double I = integrate_real_line(f, {x + lx.B * h, y - ly.B * tau}, s);
    return (I - ly.density(m * h, x, y)) / h;
}

GridKernel::GridKernel(Mat interior, std::vector<Vec> exterior, const TailFitter* fitter)
    : M_(std::move(interior)), ext_(std::move(exterior)), fitter_(fitter)
{
}

Vec GridKernel::apply(const Vec& v) const
{
    Vec out = M_ * v;
    if (fitter_ && !ext_.empty()) {
        PowerTail t = fitter_->fit(v);
        out += t.c_plus * ext_[0] + t.c_minus * ext_[1];
        if (fitter_->kappa2 > 0.0) out += t.d_plus * ext_[2] + t.d_minus * ext_[3];
    }
    return out;
}

Mat GridKernel::apply(const Mat& V) const
{
    Mat out = M_ * V;
    if (fitter_ && !ext_.empty()) {
        const int nb = fitter_->kappa2 > 0.0 ? 4 : 2;
        Mat A(nb, V.rows()), X(V.rows(), nb);
        A.row(0) = fitter_->a_plus.transpose();
        A.row(1) = fitter_->a_minus.transpose();
        if (nb == 4) {
            A.row(2) = fitter_->b_plus.transpose();
            A.row(3) = fitter_->b_minus.transpose();
        }
        for (int b = 0; b < nb; ++b) X.col(b) = ext_[b];
        out.noalias() += X * (A * V);
    }
    return out;
}

ExtendedNodes extended_nodes(const UniformGrid& g, const TailFitter& fit, double resolve)
{
    ExtendedNodes e;
    e.n_interior = g.n;
    Vec zp, wp, zm, wm;
    exterior_rule(g, fit.center, +1, resolve, zp, wp);
    exterior_rule(g, fit.center, -1, resolve, zm, wm);
    const Eigen::Index ne = zp.size() + zm.size();
    e.z.resize(g.n + ne);
    e.w.resize(g.n + ne);
    e.z << g.points(), zp, zm;
    e.w << g.trapezoid_weights(), wp, wm;
    e.basis.assign(4, Vec::Zero(ne));
    for (Eigen::Index q = 0; q < ne; ++q) {
        const bool right = q < zp.size();
        const double r = std::abs(e.z[g.n + q] - fit.center);
        e.basis[right ? 0 : 1][q] = std::pow(r, -fit.kappa);
        if (fit.kappa2 > 0.0) e.basis[right ? 2 : 3][q] = std::pow(r, -fit.kappa2);
    }
    return e;
}

GridKernel make_grid_kernel(const UniformGrid& g, const TailFitter& fit, const ExtendedNodes& ext,
                            const std::function<void(double y, Eigen::Ref<Vec> row)>& k)
{
    const int n = g.n;
    const Eigen::Index ne = ext.z.size() - n;
    Mat M(n, n);
    std::vector<Vec> X(4, Vec::Zero(n));
    parallel_for(0, n, [&](long i) {
        Vec row(ext.z.size());
        k(g.x(static_cast<int>(i)), row);
        for (int j = 0; j < n; ++j) M(i, j) = ext.w[j] * row[j];
        for (int b = 0; b < 4; ++b) {
            double s = 0.0;
            for (Eigen::Index q = 0; q < ne; ++q) s += ext.w[n + q] * ext.basis[b][q] * row[n + q];
            X[b][i] = s;
        }
    });
    return GridKernel(std::move(M), std::move(X), &fit);
}

namespace {

GridKernel build_H(const Model& model, const UniformGrid& g, const TailFitter& fit, const ExtendedNodes& ext,
                   const Vec& Bz, const Vec& cz, double s)
{
    return make_grid_kernel(g, fit, ext, [&](double y, Eigen::Ref<Vec> row) {
        const FrozenLaw law = frozen_law(model, y);
        const double sg = law.sigma(s);
        const double shift = y - law.B * s;
        const double d1 = 1.0 / (sg * sg), kd = 1.0 / (law.alpha * law.c * s * sg);
        for (Eigen::Index j = 0; j < row.size(); ++j) {
            const double w = (shift - ext.z[j]) / sg;
            double s0, s1;
            law.fn->s01(w, s0, s1);
            // d/dz of p~^y(s, z, y) is minus the end-point derivative
            double v = -(Bz[j] - law.B) * s1 * d1;
            if (cz[j] != law.c) v -= (cz[j] - law.c) * (s0 + w * s1) * kd;
            row[j] = v;
        }
    });
}

void coefficient_values(const Model& model, const Vec& z, Vec& Bz, Vec& cz)
{
    Bz.resize(z.size());
    cz.resize(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        Bz[j] = model.B(z[j]);
        cz[j] = model.jump_scale(z[j]);
    }
}

} // namespace

KernelField kernel_field_H(const Model& model, const UniformGrid& g, const TailFitter& fit)
{
    auto ext = std::make_shared<ExtendedNodes>(extended_nodes(g, fit, lag_resolve(model, model.T / 64.0)));
    auto Bz = std::make_shared<Vec>(), cz = std::make_shared<Vec>();
    coefficient_values(model, ext->z, *Bz, *cz);
    auto L = std::make_shared<Mat>(fractional_matrix(model.alpha(), g, fit));
    Vec Bp(g.n), c(g.n);
    for (int i = 0; i < g.n; ++i) {
        Bp[i] = model.B(g.x(i), 1);
        c[i] = model.jump_scale(g.x(i));
    }
    KernelField kf;
    const Model* mp = &model;
    const UniformGrid grid = g;
    const TailFitter* fp = &fit;
    kf.at = [mp, grid, fp, ext, Bz, cz](double s) { return build_H(*mp, grid, *fp, *ext, *Bz, *cz, s); };
    kf.limit0 = [L, Bp, c](const Vec& v) -> Vec {
        Vec cv = c.cwiseProduct(v);
        return -Bp.cwiseProduct(v) + (*L) * cv - c.cwiseProduct((*L) * v);
    };
    kf.omega = std::min(1.0, 1.0 / model.alpha());
    const double c1 = std::pow(model.base_scale(), 1.0 / model.alpha());
    kf.s_resolved = std::pow(2.0 * g.step / (model.coeffs.c_lower * c1), model.alpha());
    return kf;
}

Vec convolve(ConvolutionKind kind, const std::function<Vec(double)>& lhs, const KernelField& rhs, double t,
             double h, ConvolveDiagnostics* diag)
{
    ConvolveDiagnostics d;
    Vec out;
    if (kind == ConvolutionKind::Discrete) {
        require(h > 0.0, "convolve: discrete convolution needs a step h");
        const int k = static_cast<int>(std::lround(t / h));
        require(std::abs(k * h - t) < 1e-9 * t, "convolve: t must lie on the time grid");
        for (int j = 0; j < k; ++j) {
            Vec term = rhs.at(t - j * h).apply(lhs(j * h));
            if (out.size() == 0) out = Vec::Zero(term.size());
            out += h * term;
            ++d.nodes;
        }
        if (diag) *diag = d;
        return out;
    }
    // continuous: both halves substituted, kernel limit used below the resolved lag
    auto evaluate = [&](int n, std::vector<std::pair<double, double>>* probe) {
        Vec u, w;
        endpoint_singular_rule(t, rhs.omega, n, u, w);
        Vec acc;
        for (Eigen::Index q = 0; q < u.size(); ++q) {
            const double s = t - u[q];
            Vec l = lhs(u[q]);
            Vec v = (s < rhs.s_resolved && rhs.limit0) ? rhs.limit0(l) : rhs.at(s).apply(l);
            if (acc.size() == 0) acc = Vec::Zero(v.size());
            acc += w[q] * v;
            if (probe && s >= rhs.s_resolved) probe->push_back({s, v.cwiseAbs().maxCoeff()});
        }
        return acc;
    };
    std::vector<std::pair<double, double>> probe;
    int n = 64;
    out = evaluate(n, &probe);
    d.nodes = 2 * n;
    d.converged = false;
    while (n < 512) {
        n *= 2;
        Vec next = evaluate(n, nullptr);
        d.nodes += 2 * n;
        const double scale = std::max(next.cwiseAbs().maxCoeff(), 1e-300);
        const double change = (next - out).cwiseAbs().maxCoeff() / scale;
        out = next;
        if (change < 1e-6) {
            d.converged = true;
            break;
        }
    }
    std::sort(probe.begin(), probe.end());
    if (probe.size() >= 2 && probe[0].second > 0.0 && probe[1].second > 0.0 && probe[1].first > probe[0].first) {
        d.measured_exponent = std::log(probe[0].second / probe[1].second) / std::log(probe[0].first / probe[1].first);
        if (d.measured_exponent < rhs.omega - 1.0 - 0.25)
            d.warning = "convolve: observed endpoint blow-up exponent " + std::to_string(d.measured_exponent) +
                        " is stronger than the declared " + std::to_string(rhs.omega - 1.0);
    }
    if (diag) *diag = d;
    return out;
}

Mat fractional_matrix(double alpha, const UniformGrid& g, const TailFitter& fit)
{
    const int n = g.n;
    const int K = 2 * (n - 1);
    const double D = g.step;
    const double R = K * D;
    const double beta = 2.0 - alpha;
    // omega_k = integral of the hat function at k D against r^(1 - alpha)
    Vec om(K + 1);
    {
        auto I1 = [&](double a, double b) { return (std::pow(b, beta) - std::pow(a, beta)) / beta; };
        auto I2 = [&](double a, double b) { return (std::pow(b, beta + 1) - std::pow(a, beta + 1)) / (beta + 1); };
        om[0] = (D * I1(0, D) - I2(0, D)) / D;
        const GaussRule& gr = gauss_legendre(8);
        for (int k = 1; k <= K; ++k) {
            if (k <= 2) {
                double a = (k - 1) * D, b = k * D;
                om[k] = (I2(a, b) - a * I1(a, b)) / D;
                if (k < K) om[k] += ((b + D) * I1(b, b + D) - I2(b, b + D)) / D;
                continue;
            }
            double s = 0.0;
            for (int q = 0; q < 8; ++q) {
                double x = 0.5 * (gr.nodes[q] + 1.0);
                s += gr.weights[q] * x * std::pow((k - 1 + x) * D, 1.0 - alpha);
                if (k < K) s += gr.weights[q] * x * std::pow((k + 1 - x) * D, 1.0 - alpha);
            }
            om[k] = 0.5 * D * s;
        }
    }
    // coefficients of D_k = g(x+kD) + g(x-kD) - 2 g(x); Q(0) extrapolated from Q(D), Q(2D)
    Vec ck(K + 1);
    ck[0] = 0.0;
    for (int k = 1; k <= K; ++k) ck[k] = om[k] / (k * k * D * D);
    ck[1] += (4.0 / 3.0) * om[0] / (D * D);
    ck[2] -= om[0] / (3.0 * 4.0 * D * D);
    const double csum = ck.sum();
    const double norm = 1.0 / (2.0 * c_alpha(alpha));

    Mat L = Mat::Zero(n, n);
    const int nb = fit.kappa2 > 0.0 ? 4 : 2;
    Mat cols = Mat::Zero(n, nb);
    const GaussRule& gr = gauss_legendre(32);
    const double hi = g.hi(), lo = g.lo;
    auto basis = [&](double x, int b) {
        const bool right = x > hi;
        if ((b % 2 == 0) != right) return 0.0;
        double r = std::abs(x - fit.center);
        return std::pow(r, b < 2 ? -fit.kappa : -fit.kappa2);
    };
    parallel_for(0, n, [&](long il) {
        const int i = static_cast<int>(il);
        const double xi = g.x(i);
        L(i, i) -= 2.0 * csum + 2.0 * std::pow(R, -alpha) / alpha;
        for (int k = 1; k <= K; ++k) {
            for (int j : {i + k, i - k}) {
                if (j >= 0 && j < n) {
                    L(i, j) += ck[k];
                } else {
                    const double x = lo + j * D;
                    for (int b = 0; b < nb; ++b) cols(i, b) += ck[k] * basis(x, b);
                }
            }
        }
        // far field beyond R, rho = R / v
        for (int b = 0; b < nb; ++b) {
            const double kap = b < 2 ? fit.kappa : fit.kappa2;
            const double a = (b % 2 == 0) ? xi - fit.center : fit.center - xi;
            double s = 0.0;
            for (int q = 0; q < 32; ++q) {
                double v = 0.5 * (gr.nodes[q] + 1.0);
                s += 0.5 * gr.weights[q] * std::pow(a + R / v, -kap) * std::pow(v, alpha - 1.0);
            }
            cols(i, b) += std::pow(R, -alpha) * s;
        }
    });
    Mat A(nb, n);
    A.row(0) = fit.a_plus.transpose();
    A.row(1) = fit.a_minus.transpose();
    if (nb == 4) {
        A.row(2) = fit.b_plus.transpose();
        A.row(3) = fit.b_minus.transpose();
    }
    L.noalias() += cols * A;
    L *= norm;
    return L;
}

Eigen::SparseMatrix<double> derivative_matrix(const UniformGrid& g, const TailFitter& fit)
{
    const int n = g.n;
    const double D = g.step;
    const int nb = fit.kappa2 > 0.0 ? 4 : 2;
    const Vec* fa[4] = {&fit.a_plus, &fit.a_minus, &fit.b_plus, &fit.b_minus};
    const double st[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
    std::vector<Eigen::Triplet<double>> tr;
    for (int i = 0; i < n; ++i) {
        for (int o = -2; o <= 2; ++o) {
            const double c = st[o + 2] / (12.0 * D);
            if (c == 0.0) continue;
            const int j = i + o;
            if (j >= 0 && j < n) {
                tr.emplace_back(i, j, c);
                continue;
            }
            const double x = g.lo + j * D;
            const bool right = j >= n;
            const double r = std::abs(x - fit.center);
            for (int b = 0; b < nb; ++b) {
                if ((b % 2 == 0) != right) continue;
                const double bv = std::pow(r, b < 2 ? -fit.kappa : -fit.kappa2);
                const Vec& a = *fa[b];
                for (int m = 0; m < n; ++m)
                    if (a[m] != 0.0) tr.emplace_back(i, m, c * bv * a[m]);
            }
        }
    }
    Eigen::SparseMatrix<double> S(n, n);
    S.setFromTriplets(tr.begin(), tr.end());
    return S;
}

SeriesVariant parse_variant(const std::string& s)
{
    if (s == "p") return SeriesVariant::P;
    if (s == "p_d" || s == "pd") return SeriesVariant::PD;
    if (s == "p_N" || s == "p_n" || s == "pn") return SeriesVariant::PN;
    throw Error("unknown series variant '" + s + "' (expected p, p_d or p_N)");
}

std::string variant_name(SeriesVariant v)
{
    switch (v) {
    case SeriesVariant::P: return "p";
    case SeriesVariant::PD: return "p_d";
    case SeriesVariant::PN: return "p_N";
    }
    return "?";
}

SeriesEngine::SeriesEngine(const Model& model, double t, double x0, const UniformGrid& g,
                           const DensityGridSpec& dg, int lag_steps)
    : model_(model), t_(t), x0_(x0), g_(g), dg_(dg), M_(lag_steps)
{
    require(model.coeffs.dim == 1, "series: only d = 1 is supported");
    require(t > 0.0 && t <= model.T * (1.0 + 1e-12), "series: t must lie in (0, T]");
    require(M_ >= 2, "series: need at least two lag steps");
    x0_index_ = static_cast<int>(std::lround((x0 - g.lo) / g.step));
    require(x0_index_ >= 0 && x0_index_ < g.n && std::abs(g.x(x0_index_) - x0) < 1e-9 * std::max(1.0, g.step),
            "series: x0 must be a grid node");
    fit_ = density_tail_fitter(model, g, x0, dg);
    ext_ = extended_nodes(g, fit_, lag_resolve(model, t / M_));
    L_ = fractional_matrix(model.alpha(), g, fit_);
    Bp_.resize(g.n);
    c_.resize(g.n);
    for (int i = 0; i < g.n; ++i) {
        Bp_[i] = model.B(g.x(i), 1);
        c_[i] = model.jump_scale(g.x(i));
    }
}

Vec SeriesEngine::frozen_start(double t) const
{
    Vec v(g_.n);
    for (int i = 0; i < g_.n; ++i) v[i] = frozen_law(model_, g_.x(i)).density(t, x0_, g_.x(i));
    return v;
}

Vec SeriesEngine::limit0(const Vec& v) const
{
    Vec cv = c_.cwiseProduct(v);
    return -Bp_.cwiseProduct(v) + L_ * cv - c_.cwiseProduct(L_ * v);
}

void SeriesEngine::ensure_lags()
{
    if (!H_.empty() || model_.constant_coefficients()) return;
    Vec Bz, cz;
    coefficient_values(model_, ext_.z, Bz, cz);
    H_.resize(M_ + 1);
    for (int l = 1; l <= M_; ++l) H_[l] = build_H(model_, g_, fit_, ext_, Bz, cz, l * t_ / M_);
}

std::vector<GridKernel> SeriesEngine::discrete_kernels(int N)
{
    ensure_lags();
    // index m = 1..N, lag m h (variant p_d) reuses the lag table when N divides it
    std::vector<GridKernel> K(N + 1);
    Vec Bz, cz;
    coefficient_values(model_, ext_.z, Bz, cz);
    for (int m = 1; m <= N; ++m) {
        if (M_ % N == 0) {
            K[m] = H_[m * (M_ / N)];
        } else {
            K[m] = build_H(model_, g_, fit_, ext_, Bz, cz, m * t_ / N);
        }
    }
    return K;
}

SeriesResult SeriesEngine::run(const SeriesOptions& opt)
{
    require(opt.r_max >= 1, "series: r_max must be at least 1");
    const int n = g_.n;
    const bool constant = model_.constant_coefficients();
    std::vector<Mat> terms;
    std::vector<double> wall;
    Vec sum = frozen_start(t_);
    terms.push_back(sum);
    wall.push_back(0.0);

    auto keep_going = [&](int r) {
        if (r > opt.r_limit) return false;
        if (r <= opt.r_max) return true;
        const double last = terms.back().cwiseAbs().maxCoeff();
        return last >= opt.rel_stop * sum.cwiseAbs().maxCoeff();
    };
    auto check_decay = [&](int r) {
        if (r < 5) return;
        const double a = terms[r].cwiseAbs().maxCoeff(), b = terms[r - 1].cwiseAbs().maxCoeff();
        if (a > b && a > 1e-14 * sum.cwiseAbs().maxCoeff())
            throw Error("series: terms stopped decaying at r = " + std::to_string(r) + " (sup " + std::to_string(a) +
                        " after " + std::to_string(b) + "); quadrature or model violates the kernel bounds");
    };

    if (opt.variant == SeriesVariant::P) {
        ensure_lags();
        const int M = M_;
        const double dl = t_ / M;
        // Phi columns m = 0..M: the previous term at tau_m (column 0 handled separately)
        Mat Phi(n, M + 1);
        Phi.col(0).setZero();
        for (int m = 1; m <= M; ++m) Phi.col(m) = frozen_start(m * dl);
        for (int r = 1; !constant && keep_going(r); ++r) {
            auto t0 = std::chrono::steady_clock::now();
            Mat Out = Mat::Zero(n, M + 1);
            if (r == 1) {
                const double w0 = g_.trapezoid_weights()[x0_index_];
                for (int m = 1; m <= M; ++m) Out.col(m) += 0.5 * H_[m].matrix().col(x0_index_) / w0;
            }
            for (int l = 1; l < M; ++l) Out.middleCols(l + 1, M - l) += H_[l].apply(Mat(Phi.middleCols(1, M - l)));
            for (int m = 1; m <= M; ++m) Out.col(m) += 0.5 * limit0(Phi.col(m));
            Out *= dl;
            Phi = Out;
            terms.push_back(Phi.col(M));
            sum += Phi.col(M);
            wall.push_back(ms_since(t0));
            check_decay(r);
        }
    } else {
        const int N = opt.N;
        require(N >= 1, "series: N must be positive");
        const double h = t_ / N;
        std::vector<GridKernel> K;
        if (!constant) {
            if (opt.variant == SeriesVariant::PD) {
                K = discrete_kernels(N);
            } else {
                // H_N(m)(z, y) = h^-1 [ integral p~^z(h, z, w) p~^y((m-1) h, w, y) dw - p~^y(m h, z, y) ]
                const Eigen::Index nx = ext_.z.size();
                Mat P1(nx, nx);  // P1(z, w) w_w
                parallel_for(0, nx, [&](long jz) {
                    const FrozenLaw lz = frozen_law(model_, ext_.z[jz]);
                    const double sg = lz.sigma(h);
                    for (Eigen::Index q = 0; q < nx; ++q)
                        P1(jz, q) = lz.density_given(h, sg, ext_.z[jz], ext_.z[q]) * ext_.w[q];
                });
                std::vector<FrozenLaw> ly(n);
                Vec sy1(n);
                for (int i = 0; i < n; ++i) {
                    ly[i] = frozen_law(model_, g_.x(i));
                    sy1[i] = ly[i].sigma(h);
                }
                K.resize(N + 1);
                for (int m = 1; m <= N; ++m) {
                    Mat A(nx, n);  // A(z, y)
                    if (m == 1) {
                        parallel_for(0, nx, [&](long jz) {
                            const double z = ext_.z[jz];
                            const FrozenLaw lz = frozen_law(model_, z);
                            const double sz = lz.sigma(h);
                            for (int i = 0; i < n; ++i)
                                A(jz, i) = (lz.density_given(h, sz, z, g_.x(i)) -
                                            ly[i].density_given(h, sy1[i], z, g_.x(i))) / h;
                        });
                    } else {
                        Mat Q(nx, n);
                        const double tau = (m - 1) * h;
                        parallel_for(0, n, [&](long i) {
                            const double sg = ly[i].sigma(tau);
                            for (Eigen::Index q = 0; q < nx; ++q)
                                Q(q, i) = ly[i].density_given(tau, sg, ext_.z[q], g_.x(i));
                        });
                        A.noalias() = P1 * Q;
                        parallel_for(0, n, [&](long i) {
                            const double sg = ly[i].sigma(m * h);
                            for (Eigen::Index jz = 0; jz < nx; ++jz)
                                A(jz, i) = (A(jz, i) - ly[i].density_given(m * h, sg, ext_.z[jz], g_.x(i))) / h;
                        });
                    }
                    K[m] = make_grid_kernel(g_, fit_, ext_,
                                            [&](double y, Eigen::Ref<Vec> row) {
                                                const int i = static_cast<int>(std::lround((y - g_.lo) / g_.step));
                                                row = A.col(i);
                                            });
                }
            }
        }
        Mat Phi(n, N + 1);
        Phi.col(0).setZero();
        for (int k = 1; k <= N; ++k) Phi.col(k) = frozen_start(k * h);
        const int r_cap = opt.variant == SeriesVariant::PN ? N : opt.r_limit;
        const double w0 = g_.trapezoid_weights()[x0_index_];
        for (int r = 1; !constant && r <= r_cap && keep_going(r); ++r) {
            auto t0 = std::chrono::steady_clock::now();
            Mat Out = Mat::Zero(n, N + 1);
            if (r == 1) {
                for (int k = 1; k <= N; ++k) Out.col(k) += K[k].matrix().col(x0_index_) / w0;
            }
            for (int l = 1; l < N; ++l) Out.middleCols(l + 1, N - l) += K[l].apply(Mat(Phi.middleCols(1, N - l)));
            Out *= h;
            Phi = Out;
            terms.push_back(Phi.col(N));
            sum += Phi.col(N);
            wall.push_back(ms_since(t0));
            check_decay(r);
        }
    }
    return assemble(terms, opt, wall);
}

SeriesResult SeriesEngine::assemble(const std::vector<Mat>& terms, const SeriesOptions& opt,
                                    const std::vector<double>& wall) const
{
    SeriesResult res;
    const Vec w = g_.trapezoid_weights();
    Vec sum = Vec::Zero(g_.n);
    const double omega = std::min(1.0, 1.0 / model_.alpha());
    for (size_t r = 0; r < terms.size(); ++r) {
        const Vec v = terms[r].col(0);
        sum += v;
        TermDiagnostic d;
        d.r = static_cast<int>(r);
        d.sup_norm = v.cwiseAbs().maxCoeff();
        d.mass = w.dot(v) + fit_.fit(v).mass(g_);
        d.wall_time_ms = opt.record_wall_time ? wall[r] : 0.0;
        res.terms.push_back(d);
        res.term_values.push_back(v);
    }
    // factorial envelope C^r t^(r omega / 2) / (floor(r/2)!)^2, C matched to the first two terms
    auto fact2 = [](int r) {
        double f = std::tgamma(r / 2 + 1.0);
        return f * f;
    };
    double C = 0.0;
    for (size_t r = 1; r < std::min<size_t>(3, res.terms.size()); ++r) {
        double c = std::pow(res.terms[r].sup_norm * fact2(static_cast<int>(r)) /
                                std::pow(t_, r * omega / 2.0),
                            1.0 / r);
        C = std::max(C, c);
    }
    for (auto& d : res.terms) d.envelope = d.r == 0 ? d.sup_norm : std::pow(C, d.r) * std::pow(t_, d.r * omega / 2.0) / fact2(d.r);
    const int R = static_cast<int>(res.terms.size()) - 1;
    double tail = 0.0;
    for (int r = R + 1; r <= R + 60 && C > 0.0; ++r) tail += std::pow(C, r) * std::pow(t_, r * omega / 2.0) / fact2(r);
    res.truncation_estimate = tail;
    res.density.grid = g_;
    res.density.values = sum;
    res.density.tail = fit_.fit(sum);
    res.density.t = t_;
    res.density.x0 = x0_;
    res.density.alpha = model_.alpha();
    res.density.N = opt.variant == SeriesVariant::P ? 0 : opt.N;
    res.min_value = sum.minCoeff();
    return res;
}

SeriesResult series(const Model& model, double t, double x0, const UniformGrid& g, const DensityGridSpec& dg,
                    const SeriesOptions& opt)
{
    SeriesEngine e(model, t, x0, g, dg, opt.lag_steps);
    return e.run(opt);
}

DensityGrid leading_term_M2(const Model& model, double T, double x0, const DensityGridSpec& dg,
                            const LeadingTermOptions& opt)
{
    UniformGrid ug = UniformGrid::centered(dg.center, dg.half_width, dg.points);
    TailFitter fit = density_tail_fitter(model, ug, x0, dg);
    GridSpec gs{opt.N_fine, T, {1}};
    TransitionOperator op(model, ug, gs.h(), fit);
    std::vector<Vec> snaps;
    propagate_density(model, gs, x0, ug, op, dg, nullptr, &snaps);
    return leading_term_M2(model, T, x0, ug, op, snaps);
}

DensityGrid leading_term_M2(const Model& model, double T, double x0, const UniformGrid& g,
                            const TransitionOperator& op, const std::vector<Vec>& snapshots)
{
    require(model.coeffs.dim == 1, "leading_term_M2: only d = 1 is supported");
    require(model.coeffs.b.max_order >= 2 && model.coeffs.f.max_order >= 2,
            "leading_term_M2: coefficients need derivative oracles up to order 2");
    const int n = g.n;
    const int Nf = static_cast<int>(snapshots.size());
    require(Nf >= 2, "leading_term_M2: need the fine-chain snapshots");
    const double h = T / Nf;
    const int i0 = static_cast<int>(std::lround((x0 - g.lo) / g.step));
    require(i0 >= 0 && i0 < n && std::abs(g.x(i0) - x0) < 1e-9 * std::max(1.0, g.step),
            "leading_term_M2: x0 must be a grid node");

    DensityGrid out;
    out.grid = g;
    out.t = T;
    out.x0 = x0;
    out.alpha = model.alpha();
    out.N = Nf;
    const TailFitter& fit = op.fitter();
    if (model.constant_coefficients()) {
        out.values = Vec::Zero(n);
        out.tail = fit.fit(out.values);
        return out;
    }
    // Adjoint form: the operators act on the density p(u, x0, .), whose tail about x0 is
    // what the padding models. Phi^T v = -(B v)' + L(c v), and
    // (Phi~_*^2)^T v = (B^2 v)'' - 2 L (B c v)' + L L (c^2 v).
    const TailFitter pad = TailFitter::make(g, fit.kappa, fit.center, 0.0);
    const Mat L = fractional_matrix(model.alpha(), g, pad);
    const Eigen::SparseMatrix<double> G = derivative_matrix(g, pad);
    Vec B(n), c(n);
    for (int i = 0; i < n; ++i) {
        B[i] = model.B(g.x(i));
        c[i] = model.jump_scale(g.x(i));
    }
    const Vec B2 = B.cwiseProduct(B), Bc = B.cwiseProduct(c), c2 = c.cwiseProduct(c);
    auto phiT = [&](const Vec& v) -> Vec { return L * c.cwiseProduct(v) - G * B.cwiseProduct(v); };
    auto DT = [&](const Vec& v) -> Vec {
        Vec r = phiT(phiT(v));
        r -= G * (G * B2.cwiseProduct(v));
        r += 2.0 * (L * (G * Bc.cwiseProduct(v)));
        r -= L * (L * c2.cwiseProduct(v));
        return r;
    };
    const Vec w = g.trapezoid_weights();
    Vec e0 = Vec::Zero(n);
    e0[i0] = 1.0 / w[i0];
    Vec acc = 0.5 * h * DT(e0);
    for (int k = 1; k <= Nf; ++k) {
        acc = op.apply(acc);
        acc += (k == Nf ? 0.5 * h : h) * DT(snapshots[k - 1]);
    }
    out.values = 0.5 * acc;
    out.tail = pad.fit(out.values);
    return out;
}

} // namespace stabsde
