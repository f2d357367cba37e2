#pragma once

#include <Eigen/Dense>

#include "sawt/qap/instance.hpp"

namespace sawt {

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). result[i] is the column assigned to row i.
Permutation linear_assignment(const Eigen::MatrixXd& cost);

}  // namespace sawt
