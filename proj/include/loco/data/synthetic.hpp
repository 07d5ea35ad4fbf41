#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "loco/data/dataset.hpp"

namespace loco::data {

enum class SynthMode { gaussian_clusters, oscillatory };
enum class OodGeometry { far, overlapping };

SynthMode parse_synth_mode(std::string_view name);
OodGeometry parse_ood_geometry(std::string_view name);
std::string_view to_string(SynthMode m) noexcept;
std::string_view to_string(OodGeometry g) noexcept;

struct SynthConfig {
  SynthMode mode = SynthMode::gaussian_clusters;
  std::size_t n_classes = 4;
  std::size_t trials_per_class = 100;
  std::size_t n_channels = 4;
  std::size_t n_samples = 16;
  double class_separation = 10.0;
  double noise_std = 1.0;
  OodGeometry ood_geometry = OodGeometry::far;
  double sampling_rate_hz = 128.0;
  std::uint64_t seed = 0;
  std::string subject = "synth";

  void validate() const;
};

// Cluster-mode class means over the flattened feature space.
//  - classes are vertices of a regular simplex with pairwise distance
//    class_separation * noise_std;
//  - far: the last class sits 2x that spacing from the centroid of the
//    others, orthogonal to their span;
//  - overlapping: the last class shares class 0's mean.
// The simplex is embedded along seeded random orthonormal directions.
std::vector<std::vector<double>> cluster_means(const SynthConfig& cfg);

// Trials are emitted class by class, trials_per_class each.
EpochedDataset generate_synthetic(const SynthConfig& cfg);

// `n` subjects named "<subject>-NN" with seeds derived from cfg.seed.
std::vector<EpochedDataset> generate_subjects(const SynthConfig& cfg, std::size_t n);

}  // namespace loco::data
