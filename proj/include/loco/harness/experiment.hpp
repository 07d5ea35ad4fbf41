#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loco/data/dataset.hpp"
#include "loco/harness/cell.hpp"
#include "loco/nn/extractor.hpp"
#include "loco/ood/duq.hpp"
#include "loco/ood/logit_scorers.hpp"

namespace loco::harness {

// Declaration order is the output order of result rows.
enum class Method { softmax, mc_dropout, deep_ensemble, energy, ddu, duq, dknn };

inline constexpr Method kAllMethods[] = {Method::softmax, Method::mc_dropout, Method::deep_ensemble,
                                         Method::energy,  Method::ddu,        Method::duq,
                                         Method::dknn};

Method parse_method(std::string_view name);
std::string_view to_string(Method m) noexcept;
bool is_tuned(Method m) noexcept;

enum class ReactMode { off, on, both };
ReactMode parse_react_mode(std::string_view name);
std::string_view to_string(ReactMode m) noexcept;

// Random-search space for the DUQ head.
struct DuqSearchSpace {
  double one_minus_gamma_min = 1e-3;
  double one_minus_gamma_max = 1e-1;
  std::vector<std::size_t> centroid_sizes{32, 64, 128, 256};
  double penalty_min = 1e-5;
  double penalty_max = 5e-2;

  void validate() const;
};

struct ExperimentConfig {
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  ReactMode react = ReactMode::off;
  // Replaces the fitted percentile clamp; +inf turns ReAct into a no-op.
  std::optional<double> react_clamp_override;
  ood::ScorerConfig scorer;
  nn::ExtractorConfig extractor;  // input_dim, n_classes and seed are set per cell
  ood::DuqTrainConfig duq_train;  // seed is set per fit
  DuqSearchSpace duq_space;
  std::size_t duq_trials = 30;
  std::optional<ood::DuqHyperparams> duq_fixed;
  std::optional<std::size_t> dknn_k_fixed;
  CellConfig cell;
  std::uint64_t master_seed = 0;
  std::size_t id_class_count = 3;  // n_classes - 1, or n_classes - 2 for the inversion tables
  std::optional<bool> exclude_first_subject;  // unset: exclude iff a method needs tuning
  std::vector<int> ood_classes;               // empty: every class takes a turn
  std::size_t jobs = 1;

  void validate() const;
  bool runs(Method m) const;
  bool needs_tuning() const;
};

struct CellKey {
  int ood_class = -1;
  std::vector<int> id_classes;

  auto operator<=>(const CellKey&) const = default;
};

// The cells of one subject in output order.
std::vector<CellKey> enumerate_cells(std::size_t n_classes, const ExperimentConfig& cfg);

std::uint64_t cell_seed(std::uint64_t master_seed, std::string_view subject, const CellKey& key);

struct ResultRow {
  std::string subject;
  std::size_t subject_index = 0;
  std::string ood_class;
  std::string id_classes;  // class names joined by '|'
  CellKey key;
  Method method = Method::softmax;
  bool react = false;
  double auroc = 0.0;
  double on_task_auroc = 0.0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;  // seconds spent fitting and scoring this method
};

// Orders by (subject index, ood class, id classes, method, react).
bool row_less(const ResultRow& a, const ResultRow& b);

// A trained cell: extractor members and their deterministic embeddings.
struct PreparedCell {
  LocoCell cell;
  std::vector<nn::ExtractorModel> members;  // member 0 serves the single-model scorers
  Matrix train_embed;
  Matrix val_embed;
  Matrix id_embed;
  Matrix ood_embed;
};

PreparedCell prepare_cell(const data::EpochedDataset& dataset, const CellKey& key,
                          const ExperimentConfig& cfg, std::uint64_t seed, std::size_t n_members);

struct TunedParams {
  std::size_t dknn_k = 1;
  std::vector<double> dknn_auroc_by_k;
  ood::DuqHyperparams duq;
  struct DuqTrial {
    ood::DuqHyperparams hp;
    double auroc = 0.0;
    std::string error;  // empty when the trial succeeded
  };
  std::vector<DuqTrial> duq_trials;
};

// floor(mean number of training trials per ID class)
std::size_t dknn_k_max(const LocoCell& cell);

// Sweeps k = 1..k_max on the cell's test split; ties go to the smaller k.
std::size_t tune_dknn_k(const PreparedCell& prepared, std::vector<double>* auroc_by_k = nullptr);

ood::DuqHyperparams sample_duq_point(const DuqSearchSpace& space, nn::Rng& rng);

// Seeded random search; every trial fits a head on the cell's embeddings and
// is scored by test AUROC. Fails with a tuning error only if every trial fails.
ood::DuqHyperparams tune_duq(const PreparedCell& prepared, const ExperimentConfig& cfg,
                             std::uint64_t seed, std::vector<TunedParams::DuqTrial>* trials = nullptr);

// Scores of one (method, react) pair: id_test first, then ood_test.
struct MethodScores {
  Method method = Method::softmax;
  bool react = false;
  std::vector<double> scores;
};

struct CellFailure {
  std::string subject;
  std::string ood_class;
  std::string id_classes;
  std::string method;  // empty when the whole cell failed
  std::string message;
};

struct CellOutcome {
  std::vector<ResultRow> rows;
  std::vector<MethodScores> scores;
  std::vector<CellFailure> failures;  // methods that failed inside an otherwise good cell
};

// Runs every enabled method (and ReAct setting) on one cell. A method that
// fails is recorded and skipped; cell-level failures throw.
CellOutcome run_cell(const data::EpochedDataset& dataset, std::size_t subject_index,
                     const CellKey& key, const ExperimentConfig& cfg, const TunedParams* tuned);

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<CellFailure> failures;
  std::map<CellKey, TunedParams> tuning;
  bool first_subject_excluded = false;
  std::size_t cells_attempted = 0;
};

// Algorithm: tune on subject 0 (per cell key) when needed, then run every
// retained subject x cell on a pool of cfg.jobs workers. Output is identical
// for any worker count.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::vector<data::EpochedDataset>& datasets);

struct TuningResult {
  std::vector<CellKey> keys;
  std::map<CellKey, TunedParams> tuning;
  std::vector<CellFailure> failures;  // keys whose tuning failed
};

// Only the first-subject tuning step of run_experiment. Empty when no enabled
// method needs tuning; fails only if every key fails.
TuningResult tune_experiment(const ExperimentConfig& cfg,
                             const std::vector<data::EpochedDataset>& datasets);

}  // namespace loco::harness
