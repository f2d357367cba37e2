#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include <unistd.h>

#include <Eigen/Dense>

#include "sawt/qap/instance.hpp"
#include "sawt/qap/rng.hpp"
#include "sawt/rl/env.hpp"

namespace sawt::test {

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

/// Asymmetric instance with nonzero diagonals, the hardest case for delta formulas.
inline QapInstance random_asymmetric(int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd f = random_matrix(n, n, rng);
  Eigen::MatrixXd d = random_matrix(n, n, rng, 0.0, 10.0);
  return QapInstance("asym" + std::to_string(n), f, d);
}

inline Permutation random_perm(int n, Rng& rng) { return rl::random_permutation(n, rng); }

/// Fresh scratch directory under the build tree, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sawt-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace sawt::test
