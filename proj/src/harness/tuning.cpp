#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "loco/error.hpp"
#include "loco/harness/experiment.hpp"
#include "loco/ood/dknn.hpp"
#include "loco/seed.hpp"
#include "loco/stats/auroc.hpp"

namespace loco::harness {
namespace {

Matrix embed_rows(const nn::Extractor& model, const Matrix& x) {
  Matrix out(x.rows(), model.embed_dim());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto e = model.embed(x.row(i), nullptr);
    std::copy(e.begin(), e.end(), out.row(i).begin());
  }
  return out;
}

double log_uniform(nn::Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

}  // namespace

void DuqSearchSpace::validate() const {
  require(one_minus_gamma_min > 0.0 && one_minus_gamma_min <= one_minus_gamma_max &&
              one_minus_gamma_max < 1.0,
          ErrorCode::configuration, "DUQ one_minus_gamma bounds must satisfy 0 < min <= max < 1");
  require(penalty_min > 0.0 && penalty_min <= penalty_max, ErrorCode::configuration,
          "DUQ penalty bounds must satisfy 0 < min <= max");
  require(!centroid_sizes.empty(), ErrorCode::configuration, "DUQ centroid size grid is empty");
  for (std::size_t n : centroid_sizes)
    require(n >= 1, ErrorCode::configuration, "DUQ centroid sizes must be positive");
}

PreparedCell prepare_cell(const data::EpochedDataset& dataset, const CellKey& key,
                          const ExperimentConfig& cfg, std::uint64_t seed, std::size_t n_members) {
  PreparedCell p;
  p.cell = build_loco_cell(dataset, key.id_classes, key.ood_class, cfg.cell, seed);
  nn::ExtractorConfig ecfg = cfg.extractor;
  ecfg.input_dim = dataset.feature_dim();
  ecfg.n_classes = key.id_classes.size();
  for (std::size_t m = 0; m < n_members; ++m) {
    ecfg.seed = hash_combine(seed, m);
    p.members.push_back(nn::train_extractor(p.cell.train, p.cell.val, ecfg));
  }
  const auto& model = p.members.front();
  p.train_embed = embed_rows(model, p.cell.train.x);
  p.val_embed = embed_rows(model, p.cell.val.x);
  p.id_embed = embed_rows(model, p.cell.id_test.x);
  p.ood_embed = embed_rows(model, p.cell.ood_test);
  return p;
}

std::size_t dknn_k_max(const LocoCell& cell) {
  return cell.train.size() / cell.id_classes.size();
}

std::size_t tune_dknn_k(const PreparedCell& prepared, std::vector<double>* auroc_by_k) {
  const std::size_t k_max = std::min(dknn_k_max(prepared.cell), prepared.train_embed.rows());
  if (auroc_by_k != nullptr) auroc_by_k->clear();
  if (k_max <= 1) return 1;

  const auto index = ood::DknnIndex::fit(prepared.train_embed, 1);
  std::vector<std::vector<double>> id_d, ood_d;
  for (std::size_t i = 0; i < prepared.id_embed.rows(); ++i)
    id_d.push_back(index.sorted_distances(prepared.id_embed.row(i)));
  for (std::size_t i = 0; i < prepared.ood_embed.rows(); ++i)
    ood_d.push_back(index.sorted_distances(prepared.ood_embed.row(i)));

  std::size_t best_k = 1;
  double best = -1.0;
  std::vector<double> id_s(id_d.size()), ood_s(ood_d.size());
  for (std::size_t k = 1; k <= k_max; ++k) {
    for (std::size_t i = 0; i < id_d.size(); ++i) id_s[i] = id_d[i][k - 1];
    for (std::size_t i = 0; i < ood_d.size(); ++i) ood_s[i] = ood_d[i][k - 1];
    const double a = stats::auroc(ood_s, id_s);
    if (auroc_by_k != nullptr) auroc_by_k->push_back(a);
    if (a > best) {
      best = a;
      best_k = k;
    }
  }
  return best_k;
}

ood::DuqHyperparams sample_duq_point(const DuqSearchSpace& space, nn::Rng& rng) {
  ood::DuqHyperparams hp;
  hp.gamma = 1.0 - log_uniform(rng, space.one_minus_gamma_min, space.one_minus_gamma_max);
  std::uniform_int_distribution<std::size_t> pick(0, space.centroid_sizes.size() - 1);
  hp.centroid_size = space.centroid_sizes[pick(rng)];
  hp.penalty = log_uniform(rng, space.penalty_min, space.penalty_max);
  return hp;
}

ood::DuqHyperparams tune_duq(const PreparedCell& prepared, const ExperimentConfig& cfg,
                             std::uint64_t seed, std::vector<TunedParams::DuqTrial>* trials) {
  require(cfg.duq_trials >= 1, ErrorCode::configuration, "DUQ search needs at least one trial");
  nn::Rng rng(seed);
  const LabeledSet train{prepared.train_embed, prepared.cell.train.y};
  const LabeledSet val{prepared.val_embed, prepared.cell.val.y};

  std::vector<TunedParams::DuqTrial> log;
  ood::DuqHyperparams best;
  double best_auroc = -1.0;
  for (std::size_t t = 0; t < cfg.duq_trials; ++t) {
    TunedParams::DuqTrial trial;
    trial.hp = sample_duq_point(cfg.duq_space, rng);
    try {
      ood::DuqTrainConfig dcfg = cfg.duq_train;
      dcfg.seed = hash_seeds({seed, t});
      const auto head = ood::fit_duq_head(train, val, trial.hp, dcfg);
      std::vector<double> id_s, ood_s;
      for (std::size_t i = 0; i < prepared.id_embed.rows(); ++i)
        id_s.push_back(ood::score_duq(head, prepared.id_embed.row(i)));
      for (std::size_t i = 0; i < prepared.ood_embed.rows(); ++i)
        ood_s.push_back(ood::score_duq(head, prepared.ood_embed.row(i)));
      trial.auroc = stats::auroc(ood_s, id_s);
      if (trial.auroc > best_auroc) {
        best_auroc = trial.auroc;
        best = trial.hp;
      }
    } catch (const Error& e) {
      trial.error = e.what();
      trial.auroc = std::numeric_limits<double>::quiet_NaN();
    }
    log.push_back(trial);
  }
  if (trials != nullptr) *trials = log;
  if (best_auroc < 0.0) {
    std::string msg = "all " + std::to_string(log.size()) + " DUQ trials failed:";
    for (std::size_t t = 0; t < log.size(); ++t) msg += "\n  trial " + std::to_string(t) + ": " + log[t].error;
    fail(ErrorCode::tuning, msg);
  }
  return best;
}

}  // namespace loco::harness
