#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "loco/tensor.hpp"

namespace loco::data {

// Epoched, labeled trials of one subject. `epochs` is row-major
// trial x channel x sample; each trial flattens to a feature vector of
// n_channels * n_samples values (channel-major).
struct EpochedDataset {
  std::string subject;
  std::vector<std::string> class_names;
  std::size_t n_channels = 0;
  std::size_t n_samples = 0;
  double sampling_rate_hz = 0.0;
  std::vector<float> epochs;
  std::vector<int> labels;

  std::size_t n_trials() const noexcept { return labels.size(); }
  std::size_t n_classes() const noexcept { return class_names.size(); }
  std::size_t feature_dim() const noexcept { return n_channels * n_samples; }

  std::vector<std::size_t> class_counts() const;

  // Shape, label range, finiteness and nonempty classes; throws validation error.
  void validate() const;

  // Features widened to double, in trial order.
  LabeledSet to_labeled() const;
  LabeledSet subset(std::span<const std::size_t> trials) const;

  bool operator==(const EpochedDataset&) const = default;
};

inline constexpr int kFormatVersion = 1;

// Directory with manifest.json, epochs.f32 (binary32 LE) and labels.u32 (LE).
void save_dataset(const EpochedDataset& dataset, const std::filesystem::path& dir);
EpochedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace loco::data
