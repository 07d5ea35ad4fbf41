#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loco/harness/experiment.hpp"

namespace loco::app {

inline constexpr std::string_view kResultsHeader =
    "subject,ood_class,id_classes,method,react,auroc,on_task_auroc,seed";

// One results.csv line.
struct ResultRecord {
  std::string subject;
  std::string ood_class;
  std::string id_classes;  // '|'-joined names
  harness::Method method = harness::Method::softmax;
  bool react = false;
  double auroc = 0.0;
  double on_task_auroc = 0.0;
  std::uint64_t seed = 0;

  std::size_t id_class_count() const;
  bool operator==(const ResultRecord&) const = default;
};

std::vector<ResultRecord> to_records(std::span<const harness::ResultRow> rows);

// Doubles use the shortest representation that round-trips, so the bytes
// only depend on the values.
void write_results_csv(std::ostream& out, std::span<const ResultRecord> records);
void write_results_csv(const std::filesystem::path& path, std::span<const ResultRecord> records);

// Parse errors are format_parse errors carrying "<origin>:<line>".
std::vector<ResultRecord> read_results_csv(std::istream& in, std::string_view origin = "results.csv");
std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace loco::app
