#pragma once

#include <Eigen/Dense>

#include "sawt/qap/instance.hpp"

namespace sawt {

/// sum_{i,j} F(i,j) * D(sigma(i), sigma(j)).
double objective(const QapInstance& inst, const Permutation& sigma);
inline double objective(const QapInstance& inst, const Assignment& a) { return objective(inst, a.sigma()); }

/// trace(F * X * D * X^T) evaluated with dense products. Equals objective()
/// whenever F or D is symmetric; in general it is objective() with D^T.
double trace_objective(const Eigen::MatrixXd& flow, const Eigen::MatrixXd& distance,
                       const Eigen::MatrixXd& x);

/// Change in objective when sigma(i) and sigma(j) are exchanged. O(n), valid
/// for asymmetric matrices and nonzero diagonals. Requires i != j.
double swap_delta(const QapInstance& inst, const Permutation& sigma, int i, int j);
inline double swap_delta(const QapInstance& inst, const Assignment& a, int i, int j) {
  return swap_delta(inst, a.sigma(), i, j);
}

/// Swap positions i and j and add `delta` to the cached cost.
Assignment apply_swap(const Assignment& a, int i, int j, double delta);

/// M(i,j) = F(i,j) * D(sigma(i), sigma(j)); its entries sum to the objective.
Eigen::MatrixXd solution_aware_matrix(const QapInstance& inst, const Permutation& sigma);

/// Gradient of trace(F X D X^T) with respect to a relaxed X: F^T X D^T + F X D.
Eigen::MatrixXd objective_gradient(const QapInstance& inst, const Eigen::MatrixXd& x);

/// Relative gap (mean - bks) / bks. Negative when mean beats the reference.
double gap(double mean, double bks_mean);

}  // namespace sawt
