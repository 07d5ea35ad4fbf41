// One PASS/FAIL/SKIP line per acceptance criterion; exits nonzero on any FAIL.
// Criterion 10 runs only when LOCO_REAL_DATA lists dataset directories
// separated by ':'.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "loco/app/commands.hpp"
#include "loco/data/synthetic.hpp"
#include "loco/harness/experiment.hpp"
#include "loco/nn/extractor.hpp"
#include "loco/ood/duq.hpp"
#include "loco/ood/logit_scorers.hpp"
#include "loco/stats/auroc.hpp"
#include "loco/stats/rank.hpp"
#include "loco/stats/tests.hpp"

using namespace loco;
namespace fs = std::filesystem;
using harness::Method;

namespace {

struct Outcome {
  enum Status { pass, fail, skip } status = fail;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

std::string num(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::vector<double> method_values(const std::vector<harness::ResultRow>& rows, Method m, bool on_task = false) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.method == m) v.push_back(on_task ? r.on_task_auroc : r.auroc);
  return v;
}

std::size_t count_cells(const std::vector<harness::ResultRow>& rows) {
  std::set<std::pair<std::string, harness::CellKey>> cells;
  for (const auto& r : rows) cells.insert({r.subject, r.key});
  return cells.size();
}

// Pairwise counting, ties worth one half.
double brute_auroc(const std::vector<double>& ood, const std::vector<double>& id) {
  double wins = 0.0;
  for (double o : ood)
    for (double i : id) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  return wins / static_cast<double>(ood.size() * id.size());
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

// ---------------------------------------------------------------- criteria

Outcome c1_auroc_oracle() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    std::uniform_int_distribution<int> size(1, 25);
    std::uniform_int_distribution<int> level(0, 9);
    std::normal_distribution<double> g(0.0, 1.0);
    const int n_ood = size(rng), n_id = size(rng);
    std::vector<double> ood, id;
    // half the instances draw from 10 levels, which forces ties
    const bool tied = t % 2 == 0;
    for (int i = 0; i < n_ood; ++i) ood.push_back(tied ? level(rng) * 0.1 : g(rng) + 0.5);
    for (int i = 0; i < n_id; ++i) id.push_back(tied ? level(rng) * 0.1 : g(rng));
    worst = std::max(worst, std::abs(stats::auroc(ood, id) - brute_auroc(ood, id)));
  }
  return verdict(worst <= 1e-12, "200 sets, max |rank - pairwise| = " + sci(worst));
}

Outcome c2_gradients() {
  double worst_extractor = 0.0;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    nn::ExtractorConfig cfg;
    cfg.input_dim = 6;
    cfg.hidden1_dim = 8;
    cfg.embed_dim = 5;
    cfg.n_classes = 3;
    cfg.dropout_p = 0.3;
    cfg.seed = seed;
    nn::ExtractorModel model(cfg);
    nn::Rng data_rng(seed + 100);
    std::normal_distribution<double> g(0.0, 1.0);
    LabeledSet data;
    data.x = Matrix(7, 6);
    for (double& v : data.x.flat()) v = g(data_rng);
    for (int i = 0; i < 7; ++i) data.y.push_back(i % 3);
    std::vector<std::size_t> rows(7);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    for (bool stochastic : {false, true}) {
      const nn::Rng mask_rng(seed * 17);
      nn::ExtractorParams grad;
      {
        nn::Rng r = mask_rng;
        model.loss_and_gradient(data, rows, &grad, stochastic ? &r : nullptr);
      }
      const auto base = model.params();
      const auto spectral = model.spectral();
      for (std::size_t i = 0; i < base.flat().size(); ++i) {
        auto eval = [&](double delta) {
          auto p = base;
          p.flat()[i] += delta;
          nn::ExtractorModel m = model;
          m.set_state(p, spectral);
          nn::Rng r = mask_rng;
          return m.loss_and_gradient(data, rows, nullptr, stochastic ? &r : nullptr);
        };
        const double numeric = (eval(1e-6) - eval(-1e-6)) / 2e-6;
        worst_extractor = std::max(worst_extractor, relative_error(grad.flat()[i], numeric));
      }
    }
  }

  double worst_duq = 0.0;
  for (double penalty : {0.0, 0.05}) {
    ood::DuqHyperparams hp;
    hp.centroid_size = 4;
    hp.penalty = penalty;
    ood::DuqHead head(3, {0, 1, 2}, hp);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 0.6);
    const std::size_t block = head.centroid_size() * head.embed_dim();
    for (std::size_t i = 0; i < 3 * block; ++i) head.params()[i] = g(rng);
    std::uniform_real_distribution<double> ls(std::log(0.5), std::log(2.0));
    for (std::size_t c = 0; c < 3; ++c) {
      head.params()[3 * block + c] = ls(rng);
      std::vector<double> e(4);
      for (double& v : e) v = g(rng);
      head.set_ema(c, 1.0 + static_cast<double>(c), e);
    }
    Matrix z(6, 3);
    std::normal_distribution<double> gz(0.0, 0.7);
    for (double& v : z.flat()) v = gz(rng);
    const std::vector<int> idx{0, 1, 2, 0, 1, 2};
    std::vector<std::size_t> rows(6);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<double> grad;
    head.loss_and_gradient(z, idx, rows, &grad);
    for (std::size_t i = 0; i < head.params().size(); ++i) {
      auto eval = [&](double delta) {
        ood::DuqHead copy = head;
        copy.params()[i] += delta;
        return copy.loss_and_gradient(z, idx, rows, nullptr);
      };
      const double numeric = (eval(1e-6) - eval(-1e-6)) / 2e-6;
      worst_duq = std::max(worst_duq, relative_error(grad[i], numeric));
    }
  }
  return verdict(worst_extractor < 1e-5 && worst_duq < 1e-5,
                 "max relative error extractor " + sci(worst_extractor) + ", DUQ head " + sci(worst_duq));
}

data::SynthConfig far_config() {
  data::SynthConfig s;
  s.class_separation = 10.0;
  s.ood_geometry = data::OodGeometry::far;
  s.trials_per_class = 100;
  s.seed = 1;
  return s;
}

Outcome c3_far_ood() {
  const auto subjects = data::generate_subjects(far_config(), 4);
  harness::ExperimentConfig cfg;
  cfg.master_seed = 7;
  cfg.jobs = 1;
  const auto r = harness::run_experiment(cfg, subjects);
  bool ok = r.failures.empty() && r.rows.size() == 84;
  std::string detail = std::to_string(r.rows.size()) + " rows;";
  double worst_on_task = 1.0;
  for (Method m : harness::kAllMethods) {
    const auto a = method_values(r.rows, m);
    const double med = a.empty() ? 0.0 : stats::median(a);
    ok = ok && med >= 0.95;
    detail += " " + std::string(harness::to_string(m)) + " " + num(med, 3);
  }
  for (const auto& row : r.rows) worst_on_task = std::min(worst_on_task, row.on_task_auroc);
  ok = ok && worst_on_task >= 0.95;
  detail += "; min on-task " + num(worst_on_task, 3);
  return verdict(ok, detail);
}

Outcome c4_chance() {
  data::SynthConfig s = far_config();
  s.ood_geometry = data::OodGeometry::overlapping;
  s.seed = 11;
  const auto subjects = data::generate_subjects(s, 7);
  harness::ExperimentConfig cfg;
  cfg.master_seed = 3;
  cfg.ood_classes = {0, 3};  // the two identically distributed classes
  const auto r = harness::run_experiment(cfg, subjects);
  const std::size_t cells = count_cells(r.rows);
  bool ok = cells >= 12;
  std::string detail = std::to_string(cells) + " cells;";
  for (Method m : harness::kAllMethods) {
    const auto a = method_values(r.rows, m);
    const double med = a.empty() ? -1.0 : stats::median(a);
    ok = ok && med >= 0.40 && med <= 0.60;
    detail += " " + std::string(harness::to_string(m)) + " " + num(med, 3);
  }
  return verdict(ok, detail);
}

Outcome c5_correlation() {
  harness::ExperimentConfig cfg;
  cfg.master_seed = 5;
  cfg.methods = {Method::softmax, Method::mc_dropout, Method::deep_ensemble, Method::energy};
  std::vector<harness::ResultRow> rows;
  for (double sep : {1.0, 2.0, 4.0, 8.0}) {
    data::SynthConfig s = far_config();
    s.class_separation = sep;
    s.seed = 20 + static_cast<std::uint64_t>(sep);
    const auto r = harness::run_experiment(cfg, data::generate_subjects(s, 2));
    rows.insert(rows.end(), r.rows.begin(), r.rows.end());
  }
  const std::size_t cells = rows.size() / cfg.methods.size();
  bool ok = cells >= 24;
  std::string detail = std::to_string(cells) + " cells;";
  for (Method m : cfg.methods) {
    const auto sp = stats::spearman(method_values(rows, m, true), method_values(rows, m));
    ok = ok && sp.statistic > 0.3 && sp.p_value < 0.05;
    detail += " " + std::string(harness::to_string(m)) + " rho " + num(sp.statistic, 3) + " p " + sci(sp.p_value);
  }
  return verdict(ok, detail);
}

Outcome c6_react() {
  const auto subjects = data::generate_subjects(far_config(), 2);
  harness::ExperimentConfig cfg;
  cfg.master_seed = 7;
  cfg.react = harness::ReactMode::both;
  cfg.react_clamp_override = std::numeric_limits<double>::infinity();
  harness::TunedParams tuned;
  tuned.dknn_k = 5;

  std::size_t compared = 0, mismatched = 0;
  for (const auto& key : harness::enumerate_cells(4, cfg)) {
    const auto out = harness::run_cell(subjects[1], 1, key, cfg, &tuned);
    for (Method m : harness::kAllMethods) {
      const harness::MethodScores* off = nullptr;
      const harness::MethodScores* on = nullptr;
      for (const auto& s : out.scores) {
        if (s.method != m) continue;
        (s.react ? on : off) = &s;
      }
      if (off == nullptr || on == nullptr) {
        ++mismatched;
        continue;
      }
      ++compared;
      if (off->scores != on->scores) ++mismatched;
    }
  }

  // p = 90 on the far-OOD data, fixed hyperparameters so no subject is spent on tuning
  harness::ExperimentConfig p90;
  p90.master_seed = 7;
  p90.react = harness::ReactMode::both;
  p90.scorer.react_percentile = 90.0;
  p90.dknn_k_fixed = 5;
  p90.duq_fixed = ood::DuqHyperparams{};
  const auto r = harness::run_experiment(p90, subjects);
  app::ReportOptions opt;
  opt.compare_react = true;
  const auto records = app::to_records(r.rows);
  const auto table = app::build_report(records, opt);
  const auto col = std::find(table.columns.begin(), table.columns.end(), "p_react") - table.columns.begin();
  bool valid = !table.rows.empty();
  double lo = 1.0, hi = 0.0;
  for (const auto& row : table.rows) {
    const auto* p = std::get_if<double>(&row[static_cast<std::size_t>(col)]);
    valid = valid && p != nullptr && *p >= 0.0 && *p <= 1.0;
    if (p != nullptr) {
      lo = std::min(lo, *p);
      hi = std::max(hi, *p);
    }
  }
  return verdict(mismatched == 0 && compared == 28 && valid,
                 std::to_string(compared) + " (cell, method) score vectors identical at c = +inf, " +
                     std::to_string(mismatched) + " differ; p = 90 Wilcoxon p in [" + num(lo) + ", " + num(hi) +
                     "] over " + std::to_string(table.rows.size() / 2) + " methods");
}

Outcome c7_degeneracies() {
  auto s = far_config();
  s.seed = 3;
  const auto d = data::generate_synthetic(s);
  const auto cell = harness::build_loco_cell(d, {0, 1, 2}, 3, harness::CellConfig{}, 99);
  nn::ExtractorConfig cfg;
  cfg.input_dim = d.feature_dim();
  cfg.n_classes = 3;
  cfg.max_epochs = 30;

  cfg.dropout_p = 0.0;
  const auto no_dropout = nn::train_extractor(cell.train, cell.val, cfg);
  cfg.dropout_p = 0.25;
  const auto model = nn::train_extractor(cell.train, cell.val, cfg);
  const std::vector<const nn::Extractor*> members(5, &model);

  std::size_t n = 0, mc_diff = 0, de_diff = 0;
  nn::Rng rng(5);
  auto check = [&](std::span<const double> x) {
    ++n;
    if (ood::score_mc_dropout(no_dropout, x, 50, rng) != ood::score_softmax(no_dropout.forward(x).logits)) ++mc_diff;
    if (ood::score_ensemble(members, x) != ood::score_softmax(model.forward(x).logits)) ++de_diff;
  };
  for (std::size_t i = 0; i < cell.id_test.size(); ++i) check(cell.id_test.x.row(i));
  for (std::size_t i = 0; i < cell.ood_test.rows(); ++i) check(cell.ood_test.row(i));
  return verdict(mc_diff == 0 && de_diff == 0,
                 std::to_string(n) + " inputs; MC(p=0) != softmax on " + std::to_string(mc_diff) +
                     ", 5 identical members != single on " + std::to_string(de_diff));
}

// Exact two-sided p of the signed-rank statistic by enumerating all 2^n signs.
double exact_wilcoxon(const std::vector<double>& d) {
  std::vector<double> mag;
  for (double v : d) mag.push_back(std::abs(v));
  const auto ranks = stats::average_ranks(mag);
  const std::size_t n = d.size();
  double w_plus = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) w_plus += ranks[i];
    total += ranks[i];
  }
  const double observed = std::min(w_plus, total - w_plus);
  std::size_t extreme = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double wp = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) wp += ranks[i];
    if (std::min(wp, total - wp) <= observed + 1e-9) ++extreme;
  }
  return std::min(1.0, static_cast<double>(extreme) / static_cast<double>(std::size_t{1} << n));
}

// Exact two-sided p of U by enumerating every split of the pooled sample.
double exact_mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size(), na = a.size();
  auto u_of = [&](const std::vector<bool>& in_a) {
    double u = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (in_a[i])
        for (std::size_t j = 0; j < n; ++j)
          if (!in_a[j]) u += pooled[i] > pooled[j] ? 1.0 : (pooled[i] == pooled[j] ? 0.5 : 0.0);
    return u;
  };
  const double mean = static_cast<double>(na * (n - na)) / 2.0;
  std::vector<bool> obs(n, false);
  for (std::size_t i = 0; i < na; ++i) obs[i] = true;
  const double dev = std::abs(u_of(obs) - mean);
  std::vector<bool> sel(n, false);
  std::fill(sel.begin(), sel.begin() + static_cast<std::ptrdiff_t>(na), true);
  std::size_t extreme = 0, total = 0;
  do {
    ++total;
    if (std::abs(u_of(sel) - mean) >= dev - 1e-9) ++extreme;
  } while (std::prev_permutation(sel.begin(), sel.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

Outcome c8_statistics() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst_w = 0.0, worst_u = 0.0;
  for (std::size_t n = 2; n <= 8; ++n) {
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = g(rng) + 0.4;
        b[i] = g(rng);
      }
      std::vector<double> diff(n);
      for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
      worst_w = std::max(worst_w, std::abs(stats::wilcoxon_signed_rank(a, b).p_value - exact_wilcoxon(diff)));
      const std::size_t nb = 1 + static_cast<std::size_t>(rep) % n;
      std::vector<double> bb(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(nb));
      worst_u = std::max(worst_u, std::abs(stats::mann_whitney_u(a, bb).p_value - exact_mann_whitney(a, bb)));
    }
  }
  const std::vector<std::vector<double>> same{{1.0, 2.0, 3.0}, {3.0, 1.0, 2.0}, {2.0, 3.0, 1.0}};
  const auto kw = stats::kruskal_wallis(same);
  const auto h1 = stats::holm_correction(std::vector<double>{0.01, 0.04, 0.03});
  const auto h2 = stats::holm_correction(std::vector<double>{0.02, 0.01, 0.5});
  // hand step-down: sorted p times (3, 2, 1), running max, cap 1
  const bool holm_ok = std::abs(h1[0] - 0.03) < 1e-15 && std::abs(h1[1] - 0.06) < 1e-15 &&
                       std::abs(h1[2] - 0.06) < 1e-15 && std::abs(h2[0] - 0.04) < 1e-15 &&
                       std::abs(h2[1] - 0.03) < 1e-15 && std::abs(h2[2] - 0.5) < 1e-15;
  const bool ok = worst_w <= 0.02 && worst_u <= 0.02 && kw.statistic == 0.0 && holm_ok;
  return verdict(ok, "max |p - exact| Wilcoxon " + num(worst_w) + ", Mann-Whitney " + num(worst_u) +
                         "; KW H on identical groups " + num(kw.statistic) + "; Holm fixtures " +
                         (holm_ok ? "match" : "differ"));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c9_determinism() {
  const auto root = fs::temp_directory_path() / ("loco-acceptance-" + std::to_string(std::random_device{}()));
  app::RunConfig cfg;
  cfg.synth = far_config();
  cfg.synth->trials_per_class = 40;
  cfg.synth_subjects = 3;
  cfg.experiment.master_seed = 13;
  cfg.experiment.duq_trials = 3;
  cfg.experiment.react = harness::ReactMode::both;
  cfg.jobs_set = true;

  cfg.out_dir = root / "jobs1";
  cfg.experiment.jobs = 1;
  const auto a = app::cmd_run(cfg);
  cfg.out_dir = root / "jobs4";
  cfg.experiment.jobs = 4;
  const auto b = app::cmd_run(cfg);
  const auto x = slurp(a.results_csv), y = slurp(b.results_csv);
  std::error_code ec;
  fs::remove_all(root, ec);
  return verdict(!x.empty() && x == y, std::to_string(a.result.rows.size()) + " rows; results.csv with --jobs 1 and 4 " +
                                           (x == y ? "byte-identical" : "differ") + " (" +
                                           std::to_string(x.size()) + " bytes)");
}

Outcome c10_real_data() {
  const char* env = std::getenv("LOCO_REAL_DATA");
  if (env == nullptr || *env == '\0') return {Outcome::skip, "manual; set LOCO_REAL_DATA=dir1:dir2:... to run"};
  std::vector<data::EpochedDataset> subjects;
  std::stringstream ss(env);
  std::string dir;
  while (std::getline(ss, dir, ':'))
    if (!dir.empty()) subjects.push_back(data::load_dataset(dir));
  harness::ExperimentConfig cfg;
  const auto r = harness::run_experiment(cfg, subjects);
  const std::size_t k = subjects.front().n_classes();
  const std::size_t retained = subjects.size() - (r.first_subject_excluded ? 1 : 0);
  bool ok = r.rows.size() + r.failures.size() >= 1 && r.rows.size() == 7 * k * retained;
  std::string detail = std::to_string(r.rows.size()) + " rows (expected 7 x " + std::to_string(k) + " x " +
                       std::to_string(retained) + ");";
  for (Method m : harness::kAllMethods) {
    const auto a = method_values(r.rows, m);
    const double med = a.empty() ? -1.0 : stats::median(a);
    ok = ok && med > 0.0 && med < 1.0;
    detail += " " + std::string(harness::to_string(m)) + " " + num(med, 3);
  }
  return verdict(ok, detail);
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "AUROC oracle", 5.0, c1_auroc_oracle},
      {2, "gradient checks", 30.0, c2_gradients},
      {3, "far-OOD end-to-end", 180.0, c3_far_ood},
      {4, "chance-level control", 0.0, c4_chance},
      {5, "on-task/OOD correlation trend", 0.0, c5_correlation},
      {6, "ReAct no-op and p=90 Wilcoxon", 0.0, c6_react},
      {7, "scorer degeneracies", 0.0, c7_degeneracies},
      {8, "statistics oracles", 0.0, c8_statistics},
      {9, "determinism across --jobs", 0.0, c9_determinism},
      {10, "real-data pipeline (optional)", 0.0, c10_real_data},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Outcome::fail, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.status == Outcome::pass && c.limit_s > 0.0 && secs >= c.limit_s) {
      o.status = Outcome::fail;
      o.detail += "; over the " + num(c.limit_s, 0) + " s limit";
    }
    const char* tag = o.status == Outcome::pass ? "PASS" : o.status == Outcome::skip ? "SKIP" : "FAIL";
    if (o.status == Outcome::fail) ++failures;
    std::cout << "criterion " << c.id << ": " << tag << " - " << c.name << " - " << o.detail << " [" << num(secs, 1)
              << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
