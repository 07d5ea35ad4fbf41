#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loco/tensor.hpp"

namespace loco::ood {

// Rectified activations: penultimate activations are clamped at `clamp`, the
// p-th linear-interpolation percentile of every entry of the ID training
// embeddings.
struct ReactState {
  double clamp = 0.0;
  double percentile = 90.0;
  std::size_t fitted_on = 0;

  static ReactState fit(const Matrix& train_embeddings, double percentile);
  // Clamp at +inf; applying it changes nothing.
  static ReactState identity();

  void apply(std::span<double> embedding) const noexcept;
  std::vector<double> applied(std::span<const double> embedding) const;
};

}  // namespace loco::ood
