#include "loco/app/commands.hpp"

#include <fstream>
#include <thread>

#include "loco/data/dataset.hpp"
#include "loco/error.hpp"

namespace loco::app {
namespace {

namespace fs = std::filesystem;

void ensure_dir(const fs::path& dir) {
  require(!dir.empty(), ErrorCode::configuration, "no output directory given (--out or output.dir)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::configuration,
          "output directory " + dir.string() + " cannot be created: " + ec.message());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  out.flush();
  require(static_cast<bool>(out), ErrorCode::io, "write failed: " + path.string());
}

harness::ExperimentConfig effective(const RunConfig& cfg) {
  auto e = cfg.experiment;
  if (!cfg.jobs_set) e.jobs = std::max(1u, std::thread::hardware_concurrency());
  return e;
}

nlohmann::json hp_json(const ood::DuqHyperparams& hp) {
  return {{"gamma", hp.gamma}, {"centroid_size", hp.centroid_size}, {"penalty", hp.penalty}};
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "|" : "") + std::to_string(ids[i]);
  return s;
}

}  // namespace

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::configuration:
    case ErrorCode::config_parse:
      return 2;
    case ErrorCode::format_version:
    case ErrorCode::format_size_mismatch:
    case ErrorCode::format_label_range:
    case ErrorCode::format_parse:
    case ErrorCode::io:
    case ErrorCode::input_shape:
    case ErrorCode::validation:
    case ErrorCode::split:
    case ErrorCode::cell:
      return 3;
    default:
      return 4;
  }
}

std::vector<fs::path> cmd_synth(const RunConfig& cfg, const fs::path& out_dir) {
  require(cfg.synth.has_value(), ErrorCode::configuration, "synth needs a [synth] section in the config");
  ensure_dir(out_dir);
  std::vector<fs::path> dirs;
  for (const auto& d : data::generate_subjects(*cfg.synth, cfg.synth_subjects)) {
    const auto dir = out_dir / d.subject;
    data::save_dataset(d, dir);
    dirs.push_back(dir);
  }
  return dirs;
}

std::vector<data::EpochedDataset> load_subjects(const RunConfig& cfg) {
  if (!cfg.data_paths.empty()) {
    std::vector<data::EpochedDataset> out;
    for (const auto& p : cfg.data_paths) out.push_back(data::load_dataset(p));
    return out;
  }
  require(cfg.synth.has_value(), ErrorCode::configuration,
          "no data: pass --data, set data.paths or add a [synth] section");
  return data::generate_subjects(*cfg.synth, cfg.synth_subjects);
}

nlohmann::json failures_json(std::span<const harness::CellFailure> failures) {
  auto arr = nlohmann::json::array();
  for (const auto& f : failures) {
    arr.push_back({{"subject", f.subject},
                   {"ood_class", f.ood_class},
                   {"id_classes", f.id_classes},
                   {"method", f.method},
                   {"message", f.message}});
  }
  return arr;
}

nlohmann::json tuning_json(const std::map<harness::CellKey, harness::TunedParams>& tuning,
                           const harness::ExperimentConfig& cfg) {
  auto arr = nlohmann::json::array();
  for (const auto& [key, t] : tuning) {
    nlohmann::json j{{"ood_class", key.ood_class}, {"id_classes", join_ids(key.id_classes)}};
    if (cfg.runs(harness::Method::dknn) && !cfg.dknn_k_fixed) {
      j["dknn_k"] = t.dknn_k;
      j["dknn_auroc_by_k"] = t.dknn_auroc_by_k;
    }
    if (cfg.runs(harness::Method::duq) && !cfg.duq_fixed) {
      j["duq"] = hp_json(t.duq);
      auto trials = nlohmann::json::array();
      for (const auto& tr : t.duq_trials) {
        auto tj = hp_json(tr.hp);
        if (tr.error.empty()) tj["auroc"] = tr.auroc;
        else tj["error"] = tr.error;
        trials.push_back(std::move(tj));
      }
      j["duq_trials"] = std::move(trials);
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

RunOutput cmd_run(const RunConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  const auto subjects = load_subjects(cfg);
  const auto exp = effective(cfg);

  RunOutput out;
  out.result = harness::run_experiment(exp, subjects);
  const auto records = to_records(out.result.rows);

  out.results_csv = cfg.out_dir / "results.csv";
  write_results_csv(out.results_csv, records);

  auto summary = to_json(summarize(records));
  summary["cells_attempted"] = out.result.cells_attempted;
  summary["first_subject_excluded"] = out.result.first_subject_excluded;
  summary["failures"] = failures_json(out.result.failures);
  out.summary_json = cfg.out_dir / "summary.json";
  write_json(out.summary_json, summary);

  if (!out.result.tuning.empty()) {
    nlohmann::json t{{"tuning_subject", subjects.front().subject}, {"cells", tuning_json(out.result.tuning, exp)}};
    write_json(cfg.out_dir / "tuning.json", t);
  }
  return out;
}

fs::path cmd_tune(const RunConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  const auto subjects = load_subjects(cfg);
  const auto exp = effective(cfg);
  require(exp.needs_tuning(), ErrorCode::configuration,
          "nothing to tune: enable duq or dknn without fixed hyperparameters");
  const auto tuned = harness::tune_experiment(exp, subjects);
  nlohmann::json j{{"tuning_subject", subjects.front().subject},
                   {"cells", tuning_json(tuned.tuning, exp)},
                   {"failures", failures_json(tuned.failures)}};
  const auto path = cfg.out_dir / "tuning.json";
  write_json(path, j);
  return path;
}

std::string cmd_report(const std::vector<fs::path>& results, const ReportOptions& opt) {
  require(!results.empty(), ErrorCode::configuration, "report needs at least one results file (--data)");
  std::vector<ResultRecord> records;
  for (const auto& p : results) {
    auto r = read_results_csv(p);
    records.insert(records.end(), r.begin(), r.end());
  }
  return render(build_report(records, opt), opt.format);
}

}  // namespace loco::app
