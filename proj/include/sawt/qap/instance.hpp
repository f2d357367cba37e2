#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sawt {

/// Row-major n x 2 coordinate block.
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Koopmans-Beckmann QAP instance: n facilities with pairwise flow `flow`,
/// n locations with pairwise distance `distance`.
///
/// Construction validates shape and entries; an instance is immutable after.
class QapInstance {
 public:
  QapInstance() = default;
  QapInstance(std::string name, Eigen::MatrixXd flow, Eigen::MatrixXd distance,
              std::optional<Coords> coords = std::nullopt);

  int size() const noexcept { return static_cast<int>(flow_.rows()); }
  const std::string& name() const noexcept { return name_; }
  const Eigen::MatrixXd& flow() const noexcept { return flow_; }
  const Eigen::MatrixXd& distance() const noexcept { return distance_; }
  const std::optional<Coords>& coords() const noexcept { return coords_; }
  bool flow_symmetric() const noexcept { return flow_symmetric_; }
  bool distance_symmetric() const noexcept { return distance_symmetric_; }

  // Generator provenance, carried through serialization when present.
  std::optional<std::uint64_t> seed;
  std::optional<double> sparsity;

 private:
  std::string name_;
  Eigen::MatrixXd flow_;
  Eigen::MatrixXd distance_;
  std::optional<Coords> coords_;
  bool flow_symmetric_ = true;
  bool distance_symmetric_ = true;
};

/// sigma[i] is the location assigned to facility i.
using Permutation = std::vector<int>;

bool is_permutation(const Permutation& sigma, int n);
Permutation identity_permutation(int n);

/// A permutation together with its cached objective value.
class Assignment {
 public:
  Assignment() = default;
  /// Evaluates the objective; throws std::invalid_argument on a bad permutation.
  Assignment(const QapInstance& inst, Permutation sigma);
  /// Trusts `cost`; used by incremental updates.
  Assignment(Permutation sigma, double cost) : sigma_(std::move(sigma)), cost_(cost) {}

  const Permutation& sigma() const noexcept { return sigma_; }
  int operator[](int i) const { return sigma_[static_cast<std::size_t>(i)]; }
  int size() const noexcept { return static_cast<int>(sigma_.size()); }
  double cost() const noexcept { return cost_; }

  friend bool operator==(const Assignment& a, const Assignment& b) { return a.sigma_ == b.sigma_; }

 private:
  Permutation sigma_;
  double cost_ = 0.0;
};

/// Permutation matrix X with X(i, sigma[i]) = 1.
Eigen::MatrixXd permutation_matrix(const Permutation& sigma);

}  // namespace sawt
