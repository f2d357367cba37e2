#pragma once

#include <Eigen/Dense>

#include "sawt/qap/instance.hpp"

namespace sawt {

inline constexpr int kAssociationGraphMaxSize = 32;

/// K = F (x) D, so K(i*n + k, j*n + p) = F(i,j) * D(k,p).
struct AssociationGraph {
  Eigen::MatrixXd k;
  int n = 0;
};

AssociationGraph association_graph(const QapInstance& inst);

struct PowerIterationOptions {
  double tolerance = 1e-8;
  int max_iterations = 1000;
};

struct SpectralResult {
  Assignment assignment;
  /// Leading eigenvector of K reshaped to n x n: score(i, k) for facility i at location k.
  Eigen::MatrixXd scores;
  int iterations = 0;
  bool converged = false;
};

/// Spectral matching: power iteration for the leading eigenvector of K,
/// rounded to a permutation by maximising the linear score with the
/// Hungarian method. On non-convergence the last iterate is rounded and
/// `converged` is false.
SpectralResult spectral_matching(const QapInstance& inst, const PowerIterationOptions& opts = {});

}  // namespace sawt
