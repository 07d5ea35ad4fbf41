#include "loco/harness/cell.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "loco/error.hpp"
#include "loco/seed.hpp"

namespace loco::harness {
namespace {

std::vector<std::size_t> seeded_subset(std::vector<std::size_t> items, std::size_t n,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(items.begin(), items.end(), rng);
  items.resize(n);
  std::sort(items.begin(), items.end());
  return items;
}

LabeledSet gather(const data::EpochedDataset& d, std::span<const std::size_t> trials,
                  const std::vector<int>& id_classes) {
  LabeledSet s = d.subset(trials);
  for (int& y : s.y) {
    const auto it = std::find(id_classes.begin(), id_classes.end(), y);
    y = static_cast<int>(it - id_classes.begin());
  }
  return s;
}

}  // namespace

Normalizer Normalizer::fit(const Matrix& x, double std_floor) {
  require(x.rows() >= 1, ErrorCode::cell, "cannot fit a normalizer on no rows");
  Normalizer n;
  n.mean.assign(x.cols(), 0.0);
  n.std.assign(x.cols(), 0.0);
  const double rows = static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) n.mean[j] += x(i, j);
  for (double& m : n.mean) m /= rows;
  // correction pass; makes the mean of a constant column exact
  std::vector<double> residual(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) residual[j] += x(i, j) - n.mean[j];
  for (std::size_t j = 0; j < x.cols(); ++j) n.mean[j] += residual[j] / rows;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double d = x(i, j) - n.mean[j];
      n.std[j] += d * d;
    }
  }
  for (double& s : n.std) s = std::max(std::sqrt(s / rows), std_floor);
  return n;
}

void Normalizer::apply(Matrix& x) const {
  require(x.cols() == mean.size(), ErrorCode::input_shape, "normalizer width mismatch");
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) = (x(i, j) - mean[j]) / std[j];
}

LocoCell build_loco_cell(const data::EpochedDataset& dataset, std::vector<int> id_classes,
                         int ood_class, const CellConfig& cfg, std::uint64_t seed) {
  const int n_classes = static_cast<int>(dataset.n_classes());
  require(ood_class >= 0 && ood_class < n_classes, ErrorCode::cell,
          "OOD class " + std::to_string(ood_class) + " does not exist");
  require(id_classes.size() >= 2, ErrorCode::cell, "a cell needs at least 2 ID classes");
  for (int c : id_classes) {
    require(c >= 0 && c < n_classes, ErrorCode::cell, "ID class " + std::to_string(c) + " does not exist");
    require(c != ood_class, ErrorCode::cell, "the OOD class cannot also be an ID class");
  }
  std::vector<int> sorted = id_classes;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorCode::cell,
          "duplicate ID class");

  std::vector<std::size_t> pool, ood_pool;
  for (std::size_t t = 0; t < dataset.n_trials(); ++t) {
    const int y = dataset.labels[t];
    if (y == ood_class) ood_pool.push_back(t);
    else if (std::find(id_classes.begin(), id_classes.end(), y) != id_classes.end()) pool.push_back(t);
  }
  require(!ood_pool.empty(), ErrorCode::cell,
          dataset.subject + ": OOD class '" + dataset.class_names[static_cast<std::size_t>(ood_class)] +
              "' has no trials");

  LocoCell cell;
  cell.subject = dataset.subject;
  cell.id_classes = std::move(id_classes);
  cell.ood_class = ood_class;
  cell.seed = seed;
  cell.id_trials = stratified_split(dataset.labels, pool, cfg.fractions, hash_seeds({seed, 1}));

  auto& test = cell.id_trials.test;
  if (ood_pool.size() >= test.size()) {
    cell.ood_trials = seeded_subset(ood_pool, test.size(), hash_seeds({seed, 2}));
  } else {
    test = seeded_subset(test, ood_pool.size(), hash_seeds({seed, 3}));
    cell.ood_trials = ood_pool;
  }

  cell.train = gather(dataset, cell.id_trials.train, cell.id_classes);
  cell.val = gather(dataset, cell.id_trials.val, cell.id_classes);
  cell.id_test = gather(dataset, cell.id_trials.test, cell.id_classes);
  cell.ood_test = dataset.subset(cell.ood_trials).x;

  cell.normalizer = Normalizer::fit(cell.train.x, cfg.std_floor);
  cell.normalizer.apply(cell.train.x);
  cell.normalizer.apply(cell.val.x);
  cell.normalizer.apply(cell.id_test.x);
  cell.normalizer.apply(cell.ood_test);
  return cell;
}

}  // namespace loco::harness
