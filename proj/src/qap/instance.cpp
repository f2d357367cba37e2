#include "sawt/qap/instance.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sawt/qap/objective.hpp"

namespace sawt {
namespace {

void check_matrix(const Eigen::MatrixXd& m, const char* what, Eigen::Index n) {
  if (m.rows() != n || m.cols() != n) {
    std::ostringstream os;
    os << what << " matrix is " << m.rows() << "x" << m.cols() << ", expected " << n << "x" << n;
    throw std::invalid_argument(os.str());
  }
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " matrix has non-finite entries");
  if ((m.array() < 0.0).any()) throw std::invalid_argument(std::string(what) + " matrix has negative entries");
}

}  // namespace

QapInstance::QapInstance(std::string name, Eigen::MatrixXd flow, Eigen::MatrixXd distance,
                         std::optional<Coords> coords)
    : name_(std::move(name)), flow_(std::move(flow)), distance_(std::move(distance)), coords_(std::move(coords)) {
  const Eigen::Index n = flow_.rows();
  check_matrix(flow_, "flow", n);
  check_matrix(distance_, "distance", n);
  if (coords_) {
    if (coords_->rows() != n) throw std::invalid_argument("coords must have one row per location");
    if (!coords_->allFinite()) throw std::invalid_argument("coords has non-finite entries");
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double e = (coords_->row(i) - coords_->row(j)).norm();
        if (std::abs(e - distance_(i, j)) > 1e-9) {
          throw std::invalid_argument("distance matrix disagrees with Euclidean distances of coords");
        }
      }
    }
  }
  flow_symmetric_ = flow_ == flow_.transpose();
  distance_symmetric_ = distance_ == distance_.transpose();
}

bool is_permutation(const Permutation& sigma, int n) {
  if (static_cast<int>(sigma.size()) != n) return false;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int s : sigma) {
    if (s < 0 || s >= n || seen[static_cast<std::size_t>(s)]) return false;
    seen[static_cast<std::size_t>(s)] = true;
  }
  return true;
}

Permutation identity_permutation(int n) {
  Permutation p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  return p;
}

Assignment::Assignment(const QapInstance& inst, Permutation sigma)
    : sigma_(std::move(sigma)), cost_(objective(inst, sigma_)) {}

Eigen::MatrixXd permutation_matrix(const Permutation& sigma) {
  const auto n = static_cast<Eigen::Index>(sigma.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) x(i, sigma[static_cast<std::size_t>(i)]) = 1.0;
  return x;
}

}  // namespace sawt
