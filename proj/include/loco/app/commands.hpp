#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "loco/app/config.hpp"
#include "loco/app/report.hpp"
#include "loco/error.hpp"

namespace loco::app {

// 2 configuration, 3 data, 4 run failure.
int exit_code(ErrorCode code) noexcept;

// One dataset directory per synthetic subject under out_dir.
std::vector<std::filesystem::path> cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Data paths when given, otherwise the in-memory [synth] subjects.
std::vector<data::EpochedDataset> load_subjects(const RunConfig& cfg);

struct RunOutput {
  std::filesystem::path results_csv;
  std::filesystem::path summary_json;
  harness::ExperimentResult result;
};

// Writes results.csv, summary.json and (when tuning ran) tuning.json.
RunOutput cmd_run(const RunConfig& cfg);

// First-subject tuning only; writes tuning.json.
std::filesystem::path cmd_tune(const RunConfig& cfg);

std::string cmd_report(const std::vector<std::filesystem::path>& results, const ReportOptions& opt);

nlohmann::json failures_json(std::span<const harness::CellFailure> failures);
nlohmann::json tuning_json(const std::map<harness::CellKey, harness::TunedParams>& tuning,
                           const harness::ExperimentConfig& cfg);

}  // namespace loco::app
