#include "sawt/qap/generator.hpp"

#include <stdexcept>

#include "sawt/qap/rng.hpp"

namespace sawt {

QapInstance generate_instance(int n, double p, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate_instance: n must be at least 2");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("generate_instance: p must lie in [0, 1]");
  Rng rng(seed);
  Coords coords(n, 2);
  for (int i = 0; i < n; ++i) {
    coords(i, 0) = rng.uniform();
    coords(i, 1) = rng.uniform();
  }
  Eigen::MatrixXd distance = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      distance(i, j) = distance(j, i) = (coords.row(i) - coords.row(j)).norm();
    }
  }
  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(n, n);
  // Both draws are consumed for every pair so the stream layout does not depend on p.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double value = rng.uniform();
      const bool zeroed = rng.uniform() < p;
      flow(i, j) = flow(j, i) = zeroed ? 0.0 : value;
    }
  }
  QapInstance inst("rand" + std::to_string(n) + "_s" + std::to_string(seed), std::move(flow), std::move(distance),
                   std::move(coords));
  inst.seed = seed;
  inst.sparsity = p;
  return inst;
}

}  // namespace sawt
