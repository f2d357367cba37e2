#pragma once

#include <cstdint>

#include "sawt/qap/instance.hpp"

namespace sawt {

/// Random instance: coordinates uniform in the unit square, Euclidean
/// distances, symmetric U[0,1] flows with zero diagonal where every
/// off-diagonal pair is zeroed independently with probability `p`.
QapInstance generate_instance(int n, double p, std::uint64_t seed);

}  // namespace sawt
