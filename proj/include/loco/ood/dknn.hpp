#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loco/tensor.hpp"

namespace loco::ood {

// L2-normalizes v; a zero vector stays zero.
std::vector<double> unit_normalized(std::span<const double> v);

// Deep k-nearest-neighbour index over unit-normalized training embeddings.
// The score is the Euclidean distance from the normalized query to its k-th
// nearest stored vector.
class DknnIndex {
 public:
  DknnIndex() = default;
  static DknnIndex fit(const Matrix& embeddings, std::size_t k);

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return stored_.rows(); }
  const Matrix& stored() const noexcept { return stored_; }

  double score(std::span<const double> z) const;
  double score(std::span<const double> z, std::size_t k) const;

  // All distances from the normalized query, ascending. Used by the k sweep.
  std::vector<double> sorted_distances(std::span<const double> z) const;

 private:
  Matrix stored_;
  std::size_t k_ = 1;
};

}  // namespace loco::ood
