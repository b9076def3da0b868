#pragma once

#include <Eigen/Dense>

namespace deepsep {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace deepsep
