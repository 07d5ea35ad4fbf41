#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loco/data/dataset.hpp"
#include "loco/harness/split.hpp"
#include "loco/tensor.hpp"

namespace loco::harness {

// Per-feature z-score fitted on one matrix.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;

  static Normalizer fit(const Matrix& x, double std_floor = 1e-8);
  void apply(Matrix& x) const;
};

struct CellConfig {
  SplitFractions fractions;
  double std_floor = 1e-8;
};

// One leave-one-class-out cell. Labels in train/val/id_test are positions in
// `id_classes`, not dataset class indices.
struct LocoCell {
  std::string subject;
  std::vector<int> id_classes;
  int ood_class = -1;
  LabeledSet train;
  LabeledSet val;
  LabeledSet id_test;
  Matrix ood_test;
  Normalizer normalizer;
  std::uint64_t seed = 0;

  // Dataset trial indices behind each set.
  SplitIndices id_trials;
  std::vector<std::size_t> ood_trials;
};

// Splits the ID pool 75/10/15 per class, balances id_test against the OOD
// class by seeded subsampling of the larger side, and z-scores all four sets
// with statistics from train only.
LocoCell build_loco_cell(const data::EpochedDataset& dataset, std::vector<int> id_classes,
                         int ood_class, const CellConfig& cfg, std::uint64_t seed);

}  // namespace loco::harness
