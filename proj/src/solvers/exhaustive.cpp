#include "sawt/solvers/exhaustive.hpp"

#include <algorithm>

#include "sawt/errors.hpp"
#include "sawt/qap/objective.hpp"

namespace sawt {

Assignment brute_force(const QapInstance& inst) {
  const int n = inst.size();
  if (n > kBruteForceMaxSize) {
    throw SizeError("brute_force refuses n=" + std::to_string(n) + " (limit " + std::to_string(kBruteForceMaxSize) +
                    ")");
  }
  const auto& f = inst.flow();
  const auto& d = inst.distance();
  Permutation sigma = identity_permutation(n);
  Permutation best = sigma;
  double best_cost = objective(inst, sigma);
  while (std::next_permutation(sigma.begin(), sigma.end())) {
    double cost = 0.0;
    for (int i = 0; i < n && cost < best_cost; ++i) {
      const int si = sigma[static_cast<std::size_t>(i)];
      for (int j = 0; j < n; ++j) cost += f(i, j) * d(si, sigma[static_cast<std::size_t>(j)]);
    }
    // Entries are nonnegative, so the row loop may stop once cost reaches best_cost.
    if (cost < best_cost) {
      best_cost = cost;
      best = sigma;
    }
  }
  return Assignment(inst, std::move(best));
}

}  // namespace sawt
