#include "sawt/solvers/local_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sawt/qap/objective.hpp"
#include "sawt/qap/rng.hpp"

namespace sawt {
namespace {

// Improvements smaller than this (relative) are rounding noise.
double improvement_eps(double cost) { return 1e-12 * std::max(1.0, std::abs(cost)); }

Permutation random_permutation(int n, Rng& rng) {
  Permutation p = identity_permutation(n);
  for (int i = n - 1; i > 0; --i) {
    std::swap(p[static_cast<std::size_t>(i)], p[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  }
  return p;
}

Assignment tabu_run(const QapInstance& inst, const Assignment& start, const TabuConfig& cfg, Rng& rng) {
  const int n = inst.size();
  const int tenure = cfg.resolved_tenure(n);
  const long stall = cfg.resolved_stall(n);
  Assignment current = start;
  Assignment best = start;
  std::vector<long> tabu_until(static_cast<std::size_t>(n * n), 0);
  long last_gain = 0;
  for (long it = 1; it <= cfg.max_steps; ++it) {
    if (stall > 0 && it - last_gain > stall) {
      current = Assignment(inst, random_permutation(n, rng));
      std::fill(tabu_until.begin(), tabu_until.end(), 0);
      last_gain = it;
    }
    int bi = -1, bj = -1;
    double bdelta = std::numeric_limits<double>::infinity();
    int fi = -1, fj = -1;
    double fdelta = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double delta = swap_delta(inst, current, i, j);
        const bool tabu = tabu_until[static_cast<std::size_t>(i * n + j)] >= it;
        const bool aspires = cfg.aspiration && current.cost() + delta < best.cost() - improvement_eps(best.cost());
        if ((!tabu || aspires) && delta < bdelta) {
          bdelta = delta;
          bi = i;
          bj = j;
        }
        if (delta < fdelta) {
          fdelta = delta;
          fi = i;
          fj = j;
        }
      }
    }
    if (bi < 0) {  // every move tabu: fall back to the best one overall
      bi = fi;
      bj = fj;
      bdelta = fdelta;
    }
    current = apply_swap(current, bi, bj, bdelta);
    tabu_until[static_cast<std::size_t>(bi * n + bj)] = it + tenure;
    if (current.cost() < best.cost() - improvement_eps(best.cost())) {
      best = current;
      last_gain = it;
    }
  }
  return Assignment(inst, best.sigma());
}

}  // namespace

Assignment greedy_descent(const QapInstance& inst, const Assignment& start, int max_steps) {
  const int n = inst.size();
  Assignment current(inst, start.sigma());
  for (int step = 0; step < max_steps; ++step) {
    int bi = -1, bj = -1;
    double bdelta = -improvement_eps(current.cost());
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double delta = swap_delta(inst, current, i, j);
        if (delta < bdelta) {
          bdelta = delta;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) break;
    current = apply_swap(current, bi, bj, bdelta);
  }
  return Assignment(inst, current.sigma());
}

Assignment tabu_search(const QapInstance& inst, const Assignment& start, const TabuConfig& cfg) {
  const int n = inst.size();
  Assignment best(inst, start.sigma());
  if (cfg.max_steps <= 0 || n < 2) return best;
  Rng rng(cfg.rng_seed);
  for (int r = 0; r < std::max(1, cfg.restarts); ++r) {
    const Assignment from = r == 0 ? best : Assignment(inst, random_permutation(n, rng));
    Assignment found = tabu_run(inst, from, cfg, rng);
    if (found.cost() < best.cost()) best = std::move(found);
  }
  return best;
}

}  // namespace sawt
