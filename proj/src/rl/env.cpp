#include "sawt/rl/env.hpp"

#include <stdexcept>

#include "sawt/qap/objective.hpp"

namespace sawt::rl {

InitSolution parse_init_solution(const std::string& s) {
  if (s == "identity") return InitSolution::kIdentity;
  if (s == "random") return InitSolution::kRandom;
  throw std::invalid_argument("init solution must be 'identity' or 'random', got '" + s + "'");
}

std::string to_string(InitSolution init) { return init == InitSolution::kIdentity ? "identity" : "random"; }

Permutation random_permutation(int n, Rng& rng) {
  Permutation p = identity_permutation(n);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[j]);
  }
  return p;
}

SearchState env_reset(const QapInstance& inst, InitSolution init, Rng& rng) {
  Permutation start =
      init == InitSolution::kIdentity ? identity_permutation(inst.size()) : random_permutation(inst.size(), rng);
  Assignment a(inst, std::move(start));
  return {a, a, 0};
}

StepResult env_step(const QapInstance& inst, const SearchState& state, std::pair<int, int> action) {
  const auto [i, j] = action;
  if (!(0 <= i && i < j && j < inst.size())) {
    throw std::invalid_argument("env_step: action (" + std::to_string(i) + ", " + std::to_string(j) +
                                ") is not a pair i < j < " + std::to_string(inst.size()));
  }
  const double delta = swap_delta(inst, state.current, i, j);
  StepResult out;
  out.state.current = apply_swap(state.current, i, j, delta);
  out.state.step = state.step + 1;
  if (out.state.current.cost() < state.best.cost()) {
    out.reward = state.best.cost() - out.state.current.cost();
    out.state.best = out.state.current;
  } else {
    out.state.best = state.best;
  }
  return out;
}

}  // namespace sawt::rl
