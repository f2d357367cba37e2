#include "sawt/solvers/spectral.hpp"

#include "sawt/errors.hpp"
#include "sawt/solvers/hungarian.hpp"

namespace sawt {
namespace {

void guard(int n) {
  if (n > kAssociationGraphMaxSize) {
    throw SizeError("association graph refuses n=" + std::to_string(n) + " (limit " +
                    std::to_string(kAssociationGraphMaxSize) + ")");
  }
}

}  // namespace

AssociationGraph association_graph(const QapInstance& inst) {
  const int n = inst.size();
  guard(n);
  AssociationGraph g;
  g.n = n;
  g.k.resize(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g.k.block(i * n, j * n, n, n) = inst.flow()(i, j) * inst.distance();
  return g;
}

SpectralResult spectral_matching(const QapInstance& inst, const PowerIterationOptions& opts) {
  const int n = inst.size();
  const AssociationGraph g = association_graph(inst);
  const Eigen::Index m = static_cast<Eigen::Index>(n) * n;
  Eigen::VectorXd v = Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
  // K + s I has the same eigenvectors. With s at least the spectral radius
  // every eigenvalue becomes nonnegative, so a bipartite flow graph (whose
  // spectrum is symmetric, lambda_min = -lambda_max) no longer makes the
  // iterate oscillate.
  const double shift = g.k.cwiseAbs().rowwise().sum().maxCoeff();
  SpectralResult result;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Eigen::VectorXd next = g.k * v + shift * v;
    const double norm = next.norm();
    result.iterations = it;
    if (shift == 0.0) {  // K = 0: every vector is an eigenvector
      result.converged = true;
      break;
    }
    next /= norm;
    const double change = (next - v).norm();
    v = std::move(next);
    if (change < opts.tolerance) {
      result.converged = true;
      break;
    }
  }
  if (v.sum() < 0.0) v = -v;
  result.scores = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      v.data(), n, n);
  result.assignment = Assignment(inst, linear_assignment(-result.scores));
  return result;
}

}  // namespace sawt
