#pragma once

#include <Eigen/Dense>

namespace pdafpf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace pdafpf
