#pragma once

#include <cstdint>

#include "sawt/qap/instance.hpp"

namespace sawt {

/// Best-improvement pairwise-swap descent. Stops at a swap-local optimum or
/// after `max_steps` applied swaps. Ties go to the lexicographically lowest
/// (i, j).
Assignment greedy_descent(const QapInstance& inst, const Assignment& start, int max_steps = 1 << 30);

struct TabuConfig {
  int max_steps = 5000;
  /// Negative selects max(7, n / 4).
  int tenure = -1;
  bool aspiration = true;
  /// Total runs of max_steps each: the first from `start`, the rest from
  /// seeded random permutations.
  int restarts = 1;
  std::uint64_t rng_seed = 0;
  /// Iterations without a new best before the run jumps to a seeded random
  /// permutation (tabu list cleared, best kept). Negative selects 2 n^2; 0
  /// never restarts. A fixed tenure otherwise locks into short cycles.
  int stall_restart = -1;

  int resolved_tenure(int n) const { return tenure >= 0 ? tenure : (n / 4 > 7 ? n / 4 : 7); }
  long resolved_stall(int n) const { return stall_restart >= 0 ? stall_restart : 2L * n * n; }
};

/// Swap-neighbourhood tabu search: every iteration takes the best admissible
/// swap (not tabu, or tabu but yielding a new global best when aspiration is
/// on), applies it even if it worsens the cost, and forbids that pair for
/// `tenure` iterations. Returns the best solution seen.
Assignment tabu_search(const QapInstance& inst, const Assignment& start, const TabuConfig& cfg);

}  // namespace sawt
