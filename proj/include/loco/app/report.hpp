#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "loco/app/config.hpp"
#include "loco/app/results_io.hpp"

namespace loco::app {

struct GroupSummary {
  harness::Method method = harness::Method::softmax;
  bool react = false;
  std::size_t id_class_count = 0;
  std::size_t n = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double on_task_median = 0.0;
  // Spearman between on-task and OOD AUROC; unset for n < 3 or constant input.
  std::optional<double> rho;
  std::optional<double> rho_p;
};

struct ClassSummary {
  harness::Method method = harness::Method::softmax;
  bool react = false;
  std::size_t id_class_count = 0;
  std::string ood_class;
  std::size_t n = 0;
  double median = 0.0;
  double iqr = 0.0;
};

struct Summary {
  std::size_t rows = 0;
  std::vector<GroupSummary> groups;       // ordered by (method, react, id_class_count)
  std::vector<ClassSummary> by_class;     // OOD classes in order of first appearance
};

Summary summarize(std::span<const ResultRecord> records);
nlohmann::json to_json(const Summary& s);

struct ReportOptions {
  ReportFormat format = ReportFormat::md;
  bool compare_react = false;
  bool by_class = false;
  bool compare_id_classes = false;
};

using ReportCell = std::variant<std::monostate, std::string, double, std::size_t>;

struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<ReportCell>> rows;
};

// Median/IQR per group plus the requested tests. Every family with more than
// one p-value gets a Holm-adjusted column next to it.
ReportTable build_report(std::span<const ResultRecord> records, const ReportOptions& opt);
std::string render(const ReportTable& table, ReportFormat format);

}  // namespace loco::app
