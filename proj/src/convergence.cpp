#include "stabsde/convergence.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace stabsde {

OrderFit fit_order(const std::vector<ConvergenceRow>& rows)
{
    OrderFit f;
    std::vector<double> x, y;
    bool all_zero = !rows.empty();
    for (const auto& r : rows) {
        const double e = std::abs(r.estimate);
        if (e > 1e-13 * std::max(1.0, std::abs(r.value))) all_zero = false;
        if (!(e > 0.0) || !(r.ci < e / 3.0) || !(r.h > 0.0)) continue;
        x.push_back(std::log(r.h));
        y.push_back(std::log(e));
    }
    f.used = static_cast<int>(x.size());
    if (all_zero) {
        f.flag = "degenerate";
        return f;
    }
    if (f.used < 2) {
        f.flag = "too few rows";
        return f;
    }
    const int n = f.used;
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        A(i, 0) = 1.0;
        A(i, 1) = x[i];
        b[i] = y[i];
    }
    Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
    f.intercept = c[0];
    f.order = c[1];
    Eigen::VectorXd res = b - A * c;
    const double ss_res = res.squaredNorm();
    const double mean = b.mean();
    const double ss_tot = (b.array() - mean).square().sum();
    f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    if (n > 2) {
        const double s2 = ss_res / (n - 2);
        const double sxx = (A.col(1).array() - A.col(1).mean()).square().sum();
        f.std_error = std::sqrt(s2 / sxx);
    }
    if (f.r2 < 0.95) {
        f.flag = "r2 below 0.95";
    } else {
        f.reliable = true;
    }
    return f;
}

} // namespace stabsde
