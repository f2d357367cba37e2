#pragma once

#include "sawt/qap/instance.hpp"

namespace sawt {

inline constexpr int kBruteForceMaxSize = 10;

/// Global optimum by enumeration in lexicographic order; among equal costs
/// the lexicographically smallest permutation wins. Throws SizeError for
/// n > kBruteForceMaxSize.
Assignment brute_force(const QapInstance& inst);

}  // namespace sawt
