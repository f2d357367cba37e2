#pragma once

#include <string>
#include <utility>

#include "sawt/qap/instance.hpp"
#include "sawt/qap/rng.hpp"

namespace sawt::rl {

enum class InitSolution { kIdentity, kRandom };

InitSolution parse_init_solution(const std::string& s);
std::string to_string(InitSolution init);

/// Current solution, best solution seen so far, and step counter. The current
/// cost may exceed the best cost: worsening moves are accepted.
struct SearchState {
  Assignment current;
  Assignment best;
  int step = 0;
};

struct StepResult {
  SearchState state;
  double reward = 0.0;
};

/// Uniformly random permutation of {0..n-1} (Fisher-Yates on `rng`).
Permutation random_permutation(int n, Rng& rng);

SearchState env_reset(const QapInstance& inst, InitSolution init, Rng& rng);

/// Applies swap (i, j), i < j, unconditionally. The reward is
/// best - min(best, new cost); the best solution is replaced only on strict
/// improvement.
StepResult env_step(const QapInstance& inst, const SearchState& state, std::pair<int, int> action);

}  // namespace sawt::rl
