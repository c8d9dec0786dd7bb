#pragma once

#include <string>
#include <vector>

namespace stabsde {

struct ConvergenceRow {
    int N = 0;
    double h = 0.0;
    double value = 0.0;     // estimated quantity at this level (E g(X^N), or a norm)
    double estimate = 0.0;  // error estimate against the reference
    double ci = 0.0;        // 95% half-width of the error estimate (0 when deterministic)
    std::string method;
};

struct OrderFit {
    double order = 0.0;
    double std_error = 0.0;
    double intercept = 0.0;  // log C in |err| ~ C h^order
    double r2 = 0.0;
    int used = 0;
    bool reliable = false;
    std::string flag;  // empty when reliable: "degenerate", "too few rows", "r2 below 0.95"
};

// Log-log least squares of |estimate| against h over rows whose CI is below a third
// of the estimate magnitude.
OrderFit fit_order(const std::vector<ConvergenceRow>& rows);

struct ConvergenceReport {
    std::string name;
    std::vector<ConvergenceRow> rows;
    OrderFit fit;
    std::vector<ConvergenceRow> extrapolated;  // 2 E(2N) - E(N)
    OrderFit extrapolated_fit;
    double reference = 0.0;
    double reference_ci = 0.0;
    std::vector<std::string> notes;
};

} // namespace stabsde
