#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace loco::harness {

struct SplitFractions {
  double train = 0.75;
  double val = 0.10;
  double test = 0.15;

  void validate() const;
};

// Largest-remainder apportionment of n items; leftover units go to the
// largest fractional parts, ties to the earlier part.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitFractions& f);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Stratified three-way split of the trials listed in `pool` (indices into
// `labels`). Per class the counts come from apportion(); membership from a
// seeded shuffle. Each output list is sorted ascending. A class with fewer
// than 3 trials in the pool is a split error naming it.
SplitIndices stratified_split(std::span<const int> labels, std::span<const std::size_t> pool,
                              const SplitFractions& f, std::uint64_t seed);

// Same over every trial.
SplitIndices stratified_split(std::span<const int> labels, const SplitFractions& f,
                              std::uint64_t seed);

}  // namespace loco::harness
