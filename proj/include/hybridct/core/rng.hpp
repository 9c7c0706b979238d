// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hybridct {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to decorrelate derived seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Hash a base seed together with a path of integer keys (stage, epoch, sample, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(seed, keys));
}

/// Beta(a, b) via the ratio of two gamma draws.
double sample_beta(double a, double b, Rng& rng);

}  // namespace hybridct
