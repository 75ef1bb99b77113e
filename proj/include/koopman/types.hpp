#pragma once

#include <Eigen/Dense>

#include <vector>

namespace koopman {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using PointList = std::vector<Vector>;
using Index = Eigen::Index;

} // namespace koopman
