#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loco/data/synthetic.hpp"
#include "loco/harness/experiment.hpp"

namespace loco::app {

enum class ReportFormat { csv, json, md };
ReportFormat parse_report_format(std::string_view name);
std::string_view to_string(ReportFormat f) noexcept;

struct RunConfig {
  harness::ExperimentConfig experiment;
  std::optional<data::SynthConfig> synth;
  std::size_t synth_subjects = 4;
  std::vector<std::filesystem::path> data_paths;
  std::filesystem::path out_dir;
  ReportFormat format = ReportFormat::csv;
  bool jobs_set = false;  // false: the caller picks the available parallelism

  void validate() const;
};

// INI text: `key = value` lines under [section] headers, '#' or ';' comments.
// Unknown sections and keys are config_parse errors naming them; so is any
// value that does not parse. Relative data paths resolve against `base_dir`.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace loco::app
