#pragma once

#include <Eigen/Dense>

namespace ssmcovest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace ssmcovest
