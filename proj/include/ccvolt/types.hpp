#pragma once

#include <Eigen/Dense>

namespace ccvolt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace ccvolt
