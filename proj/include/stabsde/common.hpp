#pragma once

#include <Eigen/Dense>

#include <numbers>
#include <stdexcept>
#include <string>

namespace stabsde {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double pi = std::numbers::pi;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what)
{
    if (!ok) throw Error(what);
}

} // namespace stabsde
