#include "loco/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <set>
#include <thread>

#include "loco/error.hpp"
#include "loco/nn/functional.hpp"
#include "loco/ood/ddu.hpp"
#include "loco/ood/dknn.hpp"
#include "loco/ood/react.hpp"
#include "loco/seed.hpp"
#include "loco/stats/auroc.hpp"

namespace loco::harness {
namespace {

// Stream tags for per-purpose seeds derived from the cell seed.
constexpr std::uint64_t kMcStream = 0x6d635f64726f70ULL;
constexpr std::uint64_t kDuqStream = 0x6475715f66697400ULL;
constexpr std::uint64_t kTuneDuqStream = 0x74756e655f647571ULL;

using Clock = std::chrono::steady_clock;

std::string join_names(const data::EpochedDataset& d, const std::vector<int>& classes) {
  std::string out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (i > 0) out += '|';
    out += d.class_names[static_cast<std::size_t>(classes[i])];
  }
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

Matrix clamped(const Matrix& m, const ood::ReactState* react) {
  Matrix out = m;
  if (react != nullptr) {
    for (std::size_t i = 0; i < out.rows(); ++i) react->apply(out.row(i));
  }
  return out;
}

ood::ReactState react_state_for(const Matrix& train_embed, const ExperimentConfig& cfg) {
  if (cfg.react_clamp_override) {
    ood::ReactState s;
    s.clamp = *cfg.react_clamp_override;
    s.percentile = cfg.scorer.react_percentile;
    s.fitted_on = 0;
    return s;
  }
  return ood::ReactState::fit(train_embed, cfg.scorer.react_percentile);
}

}  // namespace

Method parse_method(std::string_view name) {
  for (Method m : kAllMethods)
    if (to_string(m) == name) return m;
  fail(ErrorCode::configuration, "unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::softmax: return "softmax";
    case Method::mc_dropout: return "mc_dropout";
    case Method::deep_ensemble: return "deep_ensemble";
    case Method::energy: return "energy";
    case Method::ddu: return "ddu";
    case Method::duq: return "duq";
    case Method::dknn: return "dknn";
  }
  return "?";
}

bool is_tuned(Method m) noexcept { return m == Method::duq || m == Method::dknn; }

ReactMode parse_react_mode(std::string_view name) {
  if (name == "off") return ReactMode::off;
  if (name == "on") return ReactMode::on;
  if (name == "both") return ReactMode::both;
  fail(ErrorCode::configuration, "unknown react mode '" + std::string(name) + "' (off, on, both)");
}

std::string_view to_string(ReactMode m) noexcept {
  return m == ReactMode::off ? "off" : (m == ReactMode::on ? "on" : "both");
}

void ExperimentConfig::validate() const {
  require(!methods.empty(), ErrorCode::configuration, "no methods selected");
  std::set<Method> seen(methods.begin(), methods.end());
  require(seen.size() == methods.size(), ErrorCode::configuration, "a method is listed twice");
  scorer.validate();
  duq_space.validate();
  cell.fractions.validate();
  require(id_class_count >= 2, ErrorCode::configuration, "id_classes must be at least 2");
  require(!runs(Method::duq) || duq_fixed || duq_trials >= 1, ErrorCode::configuration,
          "DUQ needs at least one search trial");
  if (duq_fixed) duq_fixed->validate();
  require(!dknn_k_fixed || *dknn_k_fixed >= 1, ErrorCode::configuration, "dknn k must be >= 1");
  if (react_clamp_override) {
    require(!std::isnan(*react_clamp_override), ErrorCode::configuration, "ReAct clamp must not be NaN");
  }
}

bool ExperimentConfig::runs(Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

bool ExperimentConfig::needs_tuning() const {
  return (runs(Method::duq) && !duq_fixed) || (runs(Method::dknn) && !dknn_k_fixed);
}

std::vector<CellKey> enumerate_cells(std::size_t n_classes, const ExperimentConfig& cfg) {
  const int n = static_cast<int>(n_classes);
  std::vector<int> oods = cfg.ood_classes;
  if (oods.empty()) {
    for (int c = 0; c < n; ++c) oods.push_back(c);
  }
  std::sort(oods.begin(), oods.end());
  oods.erase(std::unique(oods.begin(), oods.end()), oods.end());
  for (int c : oods) {
    require(c >= 0 && c < n, ErrorCode::configuration,
            "ood class " + std::to_string(c) + " is out of range for " + std::to_string(n) + " classes");
  }
  const bool all_but_one = cfg.id_class_count + 1 == n_classes;
  require(all_but_one || cfg.id_class_count + 2 == n_classes, ErrorCode::configuration,
          "id_classes must be n_classes - 1 or n_classes - 2 (got " +
              std::to_string(cfg.id_class_count) + " with " + std::to_string(n_classes) + " classes)");

  std::vector<CellKey> keys;
  for (int ood : oods) {
    std::vector<int> rest;
    for (int c = 0; c < n; ++c)
      if (c != ood) rest.push_back(c);
    if (all_but_one) {
      keys.push_back({ood, rest});
      continue;
    }
    for (int dropped : rest) {
      CellKey k{ood, {}};
      for (int c : rest)
        if (c != dropped) k.id_classes.push_back(c);
      keys.push_back(std::move(k));
    }
  }
  return keys;
}

std::uint64_t cell_seed(std::uint64_t master_seed, std::string_view subject, const CellKey& key) {
  std::uint64_t ids = 0x9ae16a3b2f90404fULL;
  for (int c : key.id_classes) ids = hash_combine(ids, static_cast<std::uint64_t>(c));
  return hash_seeds({master_seed, hash_string(subject), static_cast<std::uint64_t>(key.ood_class), ids});
}

bool row_less(const ResultRow& a, const ResultRow& b) {
  if (a.subject_index != b.subject_index) return a.subject_index < b.subject_index;
  if (a.key != b.key) return a.key < b.key;
  if (a.method != b.method) return a.method < b.method;
  return a.react < b.react;
}

CellOutcome run_cell(const data::EpochedDataset& dataset, std::size_t subject_index,
                     const CellKey& key, const ExperimentConfig& cfg, const TunedParams* tuned) {
  const std::uint64_t seed = cell_seed(cfg.master_seed, dataset.subject, key);
  const std::size_t n_members = cfg.runs(Method::deep_ensemble) ? cfg.scorer.ensemble_size : 1;
  const auto cell_start = Clock::now();
  const PreparedCell prep = prepare_cell(dataset, key, cfg, seed, n_members);
  const double shared_time = std::chrono::duration<double>(Clock::now() - cell_start).count();

  const LocoCell& cell = prep.cell;
  const auto& model = prep.members.front();
  const std::size_t n_id = cell.id_test.size();
  const std::size_t n_ood = cell.ood_test.rows();
  const std::size_t n_cls = key.id_classes.size();

  std::vector<bool> react_flags;
  if (cfg.react != ReactMode::on) react_flags.push_back(false);
  if (cfg.react != ReactMode::off) react_flags.push_back(true);

  std::vector<const nn::Extractor*> member_ptrs;
  for (const auto& m : prep.members) member_ptrs.push_back(&m);

  CellOutcome out;
  const std::string ood_name = dataset.class_names[static_cast<std::size_t>(key.ood_class)];
  const std::string id_names = join_names(dataset, key.id_classes);

  for (bool react : react_flags) {
    std::vector<ood::ReactState> member_react;
    if (react) {
      member_react.push_back(react_state_for(prep.train_embed, cfg));
      for (std::size_t m = 1; m < prep.members.size(); ++m) {
        Matrix train_m(cell.train.size(), prep.members[m].embed_dim());
        for (std::size_t i = 0; i < cell.train.size(); ++i) {
          const auto e = prep.members[m].embed(cell.train.x.row(i), nullptr);
          std::copy(e.begin(), e.end(), train_m.row(i).begin());
        }
        member_react.push_back(react_state_for(train_m, cfg));
      }
    }
    const ood::ReactState* r0 = react ? &member_react.front() : nullptr;
    const Matrix train_e = clamped(prep.train_embed, r0);
    const Matrix val_e = clamped(prep.val_embed, r0);
    const Matrix id_e = clamped(prep.id_embed, r0);
    const Matrix ood_e = clamped(prep.ood_embed, r0);

    // member-0 logits on the (clamped) test embeddings, id rows first
    std::vector<std::vector<double>> logits;
    for (std::size_t i = 0; i < n_id; ++i) logits.push_back(model.head(id_e.row(i)));
    for (std::size_t i = 0; i < n_ood; ++i) logits.push_back(model.head(ood_e.row(i)));
    Matrix id_probs(n_id, n_cls);
    for (std::size_t i = 0; i < n_id; ++i) {
      const auto p = nn::softmax(logits[i]);
      std::copy(p.begin(), p.end(), id_probs.row(i).begin());
    }
    const double softmax_on_task = stats::macro_ovr_auroc(id_probs, cell.id_test.y);

    auto input_row = [&](std::size_t i) {
      return i < n_id ? cell.id_test.x.row(i) : cell.ood_test.row(i - n_id);
    };
    auto embed_row = [&](std::size_t i) { return i < n_id ? id_e.row(i) : ood_e.row(i - n_id); };

    for (Method method : kAllMethods) {
      if (!cfg.runs(method)) continue;
      const auto start = Clock::now();
      std::vector<double> scores(n_id + n_ood);
      double on_task = softmax_on_task;
      try {
        switch (method) {
          case Method::softmax:
            for (std::size_t i = 0; i < scores.size(); ++i)
              scores[i] = ood::score_softmax(logits[i], cfg.scorer.softmax_statistic);
            break;
          case Method::energy:
            for (std::size_t i = 0; i < scores.size(); ++i)
              scores[i] = ood::score_energy(logits[i], cfg.scorer.energy_temperature);
            break;
          case Method::mc_dropout: {
            nn::Rng rng(hash_seeds({seed, kMcStream}));
            for (std::size_t i = 0; i < scores.size(); ++i)
              scores[i] = ood::score_mc_dropout(model, input_row(i), cfg.scorer.mc_passes, rng, r0);
            break;
          }
          case Method::deep_ensemble: {
            Matrix mean_probs(n_id, n_cls);
            for (std::size_t i = 0; i < scores.size(); ++i) {
              const auto p = react ? ood::ensemble_probabilities(member_ptrs, input_row(i), member_react)
                                   : ood::ensemble_probabilities(member_ptrs, input_row(i), nullptr);
              scores[i] = nn::entropy(p);
              if (i < n_id) std::copy(p.begin(), p.end(), mean_probs.row(i).begin());
            }
            on_task = stats::macro_ovr_auroc(mean_probs, cell.id_test.y);
            break;
          }
          case Method::ddu: {
            const auto gda = ood::fit_ddu(train_e, cell.train.y);
            for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = ood::score_ddu(gda, embed_row(i));
            break;
          }
          case Method::duq: {
            const ood::DuqHyperparams hp = cfg.duq_fixed ? *cfg.duq_fixed : tuned->duq;
            ood::DuqTrainConfig dcfg = cfg.duq_train;
            dcfg.seed = hash_seeds({seed, kDuqStream});
            const auto head = ood::fit_duq_head(LabeledSet{train_e, cell.train.y},
                                                LabeledSet{val_e, cell.val.y}, hp, dcfg);
            Matrix kernels(n_id, n_cls);
            for (std::size_t i = 0; i < scores.size(); ++i) {
              const auto k = head.kernels(embed_row(i));
              scores[i] = -*std::max_element(k.begin(), k.end());
              if (i < n_id) std::copy(k.begin(), k.end(), kernels.row(i).begin());
            }
            on_task = stats::macro_ovr_auroc(kernels, cell.id_test.y);
            break;
          }
          case Method::dknn: {
            std::size_t k = cfg.dknn_k_fixed ? *cfg.dknn_k_fixed : tuned->dknn_k;
            k = std::min(k, train_e.rows());
            const auto index = ood::DknnIndex::fit(train_e, k);
            for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = index.score(embed_row(i));
            break;
          }
        }
        ResultRow row;
        row.subject = dataset.subject;
        row.subject_index = subject_index;
        row.ood_class = ood_name;
        row.id_classes = id_names;
        row.key = key;
        row.method = method;
        row.react = react;
        row.auroc = stats::auroc(std::span(scores).subspan(n_id), std::span(scores).first(n_id));
        row.on_task_auroc = on_task;
        row.seed = seed;
        row.wall_time = std::chrono::duration<double>(Clock::now() - start).count() +
                        shared_time / static_cast<double>(cfg.methods.size() * react_flags.size());
        out.rows.push_back(std::move(row));
        out.scores.push_back({method, react, std::move(scores)});
      } catch (const Error& e) {
        out.failures.push_back({dataset.subject, ood_name, id_names,
                                std::string(to_string(method)) + (react ? "+react" : ""), e.what()});
      }
    }
  }
  return out;
}

namespace {

void check_datasets(const std::vector<data::EpochedDataset>& datasets) {
  require(!datasets.empty(), ErrorCode::configuration, "no datasets given");
  const auto& first = datasets.front();
  std::set<std::string> subjects;
  for (const auto& d : datasets) {
    d.validate();
    require(d.class_names == first.class_names, ErrorCode::configuration,
            d.subject + ": class names differ from " + first.subject);
    require(d.feature_dim() == first.feature_dim(), ErrorCode::configuration,
            d.subject + ": trial shape differs from " + first.subject);
    require(subjects.insert(d.subject).second, ErrorCode::configuration,
            "subject id '" + d.subject + "' appears twice");
  }
}

// One entry per key; an empty error string marks success.
void tune_keys(const ExperimentConfig& cfg, const data::EpochedDataset& first,
               const std::vector<CellKey>& keys, std::vector<TunedParams>& tuned,
               std::vector<std::string>& errors) {
  tuned.assign(keys.size(), TunedParams{});
  errors.assign(keys.size(), std::string());
  parallel_for(keys.size(), cfg.jobs, [&](std::size_t i) {
    try {
      const std::uint64_t seed = cell_seed(cfg.master_seed, first.subject, keys[i]);
      const auto prep = prepare_cell(first, keys[i], cfg, seed, 1);
      if (cfg.runs(Method::dknn) && !cfg.dknn_k_fixed) {
        tuned[i].dknn_k = tune_dknn_k(prep, &tuned[i].dknn_auroc_by_k);
      }
      if (cfg.runs(Method::duq) && !cfg.duq_fixed) {
        tuned[i].duq = tune_duq(prep, cfg, hash_seeds({seed, kTuneDuqStream}), &tuned[i].duq_trials);
      }
    } catch (const Error& e) {
      errors[i] = std::string("tuning failed: ") + e.what();
    }
  });
}

}  // namespace

TuningResult tune_experiment(const ExperimentConfig& cfg,
                             const std::vector<data::EpochedDataset>& datasets) {
  cfg.validate();
  check_datasets(datasets);
  const auto& first = datasets.front();
  TuningResult out;
  out.keys = enumerate_cells(first.n_classes(), cfg);
  if (!cfg.needs_tuning()) return out;
  std::vector<TunedParams> tuned;
  std::vector<std::string> errors;
  tune_keys(cfg, first, out.keys, tuned, errors);
  for (std::size_t i = 0; i < out.keys.size(); ++i) {
    const auto& key = out.keys[i];
    if (errors[i].empty()) {
      out.tuning[key] = tuned[i];
    } else {
      out.failures.push_back({first.subject, first.class_names[static_cast<std::size_t>(key.ood_class)],
                              join_names(first, key.id_classes), "", errors[i]});
    }
  }
  if (out.tuning.empty()) fail(ErrorCode::run_failed, "tuning failed for every cell: " + errors.front());
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::vector<data::EpochedDataset>& datasets) {
  cfg.validate();
  check_datasets(datasets);
  const auto& first = datasets.front();
  const auto keys = enumerate_cells(first.n_classes(), cfg);

  ExperimentResult result;
  result.first_subject_excluded = cfg.exclude_first_subject.value_or(cfg.needs_tuning());
  if (cfg.needs_tuning()) {
    require(datasets.size() >= 2, ErrorCode::configuration,
            "tuned methods need at least 2 subjects (the first one is used for tuning)");
    require(result.first_subject_excluded, ErrorCode::configuration,
            "the tuning subject cannot also be tested; drop exclude_first_subject = false or fix "
            "the tuned hyperparameters");
  }

  // Tuning on the first subject, one entry per cell key.
  std::vector<TunedParams> tuned(keys.size());
  std::vector<std::string> tuning_error(keys.size());
  if (cfg.needs_tuning()) {
    tune_keys(cfg, first, keys, tuned, tuning_error);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (tuning_error[i].empty()) result.tuning[keys[i]] = tuned[i];
    }
  }

  struct Task {
    std::size_t subject;
    std::size_t key;
  };
  std::vector<Task> tasks;
  for (std::size_t s = result.first_subject_excluded ? 1 : 0; s < datasets.size(); ++s)
    for (std::size_t k = 0; k < keys.size(); ++k) tasks.push_back({s, k});
  result.cells_attempted = tasks.size();

  std::vector<CellOutcome> outcomes(tasks.size());
  std::vector<std::string> errors(tasks.size());
  parallel_for(tasks.size(), cfg.jobs, [&](std::size_t t) {
    const auto& task = tasks[t];
    if (!tuning_error[task.key].empty()) {
      errors[t] = tuning_error[task.key];
      return;
    }
    try {
      outcomes[t] = run_cell(datasets[task.subject], task.subject, keys[task.key], cfg,
                             cfg.needs_tuning() ? &tuned[task.key] : nullptr);
    } catch (const std::exception& e) {
      errors[t] = e.what();
    }
  });

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& d = datasets[tasks[t].subject];
    const auto& key = keys[tasks[t].key];
    if (!errors[t].empty()) {
      result.failures.push_back({d.subject, d.class_names[static_cast<std::size_t>(key.ood_class)],
                                 join_names(d, key.id_classes), "", errors[t]});
      continue;
    }
    for (auto& row : outcomes[t].rows) result.rows.push_back(std::move(row));
    for (auto& f : outcomes[t].failures) result.failures.push_back(std::move(f));
  }
  std::sort(result.rows.begin(), result.rows.end(), row_less);

  if (result.rows.empty()) {
    std::string msg = "every cell failed";
    if (!result.failures.empty()) msg += "; first failure: " + result.failures.front().message;
    fail(ErrorCode::run_failed, msg);
  }
  return result;
}

}  // namespace loco::harness
