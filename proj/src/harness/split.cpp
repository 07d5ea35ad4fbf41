#include "loco/harness/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "loco/error.hpp"
#include "loco/seed.hpp"

namespace loco::harness {

void SplitFractions::validate() const {
  require(train > 0.0 && val > 0.0 && test > 0.0, ErrorCode::configuration,
          "split fractions must be positive");
  require(std::abs(train + val + test - 1.0) <= 1e-9, ErrorCode::configuration,
          "split fractions must sum to 1");
}

std::array<std::size_t, 3> apportion(std::size_t n, const SplitFractions& f) {
  const std::array<double, 3> quota{f.train * n, f.val * n, f.test * n};
  std::array<std::size_t, 3> counts{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    // guard against 0.75 * 20 landing a hair below 15
    counts[i] = static_cast<std::size_t>(std::floor(quota[i] + 1e-9));
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quota[a] - counts[a] > quota[b] - counts[b];
  });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

SplitIndices stratified_split(std::span<const int> labels, std::span<const std::size_t> pool,
                              const SplitFractions& f, std::uint64_t seed) {
  f.validate();
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t t : pool) {
    require(t < labels.size(), ErrorCode::split, "trial index out of range");
    by_class[labels[t]].push_back(t);
  }
  SplitIndices out;
  for (auto& [label, trials] : by_class) {
    require(trials.size() >= 3, ErrorCode::split,
            "class " + std::to_string(label) + " has " + std::to_string(trials.size()) +
                " trials; at least 3 are needed for a train/val/test split");
    std::sort(trials.begin(), trials.end());
    std::mt19937_64 rng(hash_seeds({seed, static_cast<std::uint64_t>(label)}));
    std::shuffle(trials.begin(), trials.end(), rng);
    const auto counts = apportion(trials.size(), f);
    auto it = trials.begin();
    out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(counts[0]));
    it += static_cast<std::ptrdiff_t>(counts[0]);
    out.val.insert(out.val.end(), it, it + static_cast<std::ptrdiff_t>(counts[1]));
    it += static_cast<std::ptrdiff_t>(counts[1]);
    out.test.insert(out.test.end(), it, trials.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitIndices stratified_split(std::span<const int> labels, const SplitFractions& f,
                              std::uint64_t seed) {
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return stratified_split(labels, all, f, seed);
}

}  // namespace loco::harness
