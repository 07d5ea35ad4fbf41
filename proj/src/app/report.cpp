#include "loco/app/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "loco/error.hpp"
#include "loco/stats/rank.hpp"
#include "loco/stats/tests.hpp"

namespace loco::app {
namespace {

using Key = std::tuple<harness::Method, bool, std::size_t>;

Key key_of(const ResultRecord& r) { return {r.method, r.react, r.id_class_count()}; }

std::map<Key, std::vector<const ResultRecord*>> group(std::span<const ResultRecord> records) {
  std::map<Key, std::vector<const ResultRecord*>> g;
  for (const auto& r : records) g[key_of(r)].push_back(&r);
  return g;
}

std::vector<double> aurocs(const std::vector<const ResultRecord*>& rs) {
  std::vector<double> v;
  for (const auto* r : rs) v.push_back(r->auroc);
  return v;
}

std::vector<std::string> class_order(std::span<const ResultRecord> records) {
  std::vector<std::string> order;
  for (const auto& r : records)
    if (std::find(order.begin(), order.end(), r.ood_class) == order.end()) order.push_back(r.ood_class);
  return order;
}

// Holm over the distinct tests of one family; `ids` maps each table row to a
// test index or -1.
std::vector<std::optional<double>> holm_for_rows(const std::vector<double>& p, const std::vector<int>& ids) {
  std::vector<std::optional<double>> out(ids.size());
  if (p.size() < 2) return out;
  const auto adj = stats::holm_correction(p);
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] >= 0) out[i] = adj[static_cast<std::size_t>(ids[i])];
  return out;
}

ReportCell opt_cell(const std::optional<double>& v) {
  if (v) return *v;
  return std::monostate{};
}

std::string md_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string cell_text(const ReportCell& c, ReportFormat f) {
  if (std::holds_alternative<std::monostate>(c)) return f == ReportFormat::md ? "-" : "";
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* n = std::get_if<std::size_t>(&c)) return std::to_string(*n);
  const double d = std::get<double>(c);
  return f == ReportFormat::md ? md_number(d) : format_double(d);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

Summary summarize(std::span<const ResultRecord> records) {
  Summary s;
  s.rows = records.size();
  for (const auto& [key, rs] : group(records)) {
    GroupSummary g;
    std::tie(g.method, g.react, g.id_class_count) = key;
    const auto a = aurocs(rs);
    std::vector<double> on;
    for (const auto* r : rs) on.push_back(r->on_task_auroc);
    g.n = a.size();
    g.median = stats::median(a);
    g.q1 = stats::quantile(a, 0.25);
    g.q3 = stats::quantile(a, 0.75);
    g.iqr = g.q3 - g.q1;
    g.on_task_median = stats::median(on);
    try {
      const auto sp = stats::spearman(on, a);
      g.rho = sp.statistic;
      g.rho_p = sp.p_value;
    } catch (const Error&) {
      // fewer than 3 rows or a constant column
    }
    s.groups.push_back(g);
  }
  const auto order = class_order(records);
  for (const auto& [key, rs] : group(records)) {
    for (const auto& name : order) {
      std::vector<double> a;
      for (const auto* r : rs)
        if (r->ood_class == name) a.push_back(r->auroc);
      if (a.empty()) continue;
      ClassSummary c;
      std::tie(c.method, c.react, c.id_class_count) = key;
      c.ood_class = name;
      c.n = a.size();
      c.median = stats::median(a);
      c.iqr = stats::iqr(a);
      s.by_class.push_back(c);
    }
  }
  return s;
}

nlohmann::json to_json(const Summary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["rows"] = s.rows;
  j["methods"] = nlohmann::json::array();
  for (const auto& g : s.groups) {
    j["methods"].push_back({{"method", harness::to_string(g.method)},
                            {"react", g.react},
                            {"id_classes", g.id_class_count},
                            {"n", g.n},
                            {"median", g.median},
                            {"q1", g.q1},
                            {"q3", g.q3},
                            {"iqr", g.iqr},
                            {"on_task_median", g.on_task_median},
                            {"spearman_rho", opt(g.rho)},
                            {"spearman_p", opt(g.rho_p)}});
  }
  j["by_ood_class"] = nlohmann::json::array();
  for (const auto& c : s.by_class) {
    j["by_ood_class"].push_back({{"method", harness::to_string(c.method)},
                                 {"react", c.react},
                                 {"id_classes", c.id_class_count},
                                 {"ood_class", c.ood_class},
                                 {"n", c.n},
                                 {"median", c.median},
                                 {"iqr", c.iqr}});
  }
  return j;
}

ReportTable build_report(std::span<const ResultRecord> records, const ReportOptions& opt) {
  require(!records.empty(), ErrorCode::format_parse, "no result rows to report");
  const auto summary = summarize(records);
  const auto groups = group(records);
  std::set<std::size_t> id_counts;
  std::set<bool> react_values;
  for (const auto& r : records) {
    id_counts.insert(r.id_class_count());
    react_values.insert(r.react);
  }
  const bool show_id = id_counts.size() > 1;
  if (opt.compare_react) {
    require(react_values.size() == 2, ErrorCode::configuration,
            "--compare-react needs rows with and without ReAct");
  }
  if (opt.compare_id_classes) {
    require(id_counts.size() == 2, ErrorCode::configuration,
            "--compare-id-classes needs rows with exactly two different ID-class counts");
  }

  ReportTable t;
  t.columns = {"method", "react"};
  if (show_id) t.columns.push_back("id_classes");
  for (const char* c : {"n", "median", "iqr", "on_task_auroc", "rho", "p_rho"}) t.columns.push_back(c);

  const std::size_t n_rows = summary.groups.size();
  for (const auto& g : summary.groups) {
    std::vector<ReportCell> row{std::string(harness::to_string(g.method)), std::size_t{g.react ? 1u : 0u}};
    if (show_id) row.emplace_back(g.id_class_count);
    row.emplace_back(g.n);
    row.emplace_back(g.median);
    row.emplace_back(g.iqr);
    row.emplace_back(g.on_task_median);
    row.push_back(opt_cell(g.rho));
    row.push_back(opt_cell(g.rho_p));
    t.rows.push_back(std::move(row));
  }

  // Appends one test family: statistic, p and (for >1 tests) Holm columns.
  auto add_family = [&](const std::string& stat_name, const std::string& p_name,
                        const std::vector<std::optional<double>>& stat, const std::vector<double>& p,
                        const std::vector<int>& ids) {
    const auto holm = holm_for_rows(p, ids);
    t.columns.push_back(stat_name);
    t.columns.push_back(p_name);
    const bool with_holm = p.size() > 1;
    if (with_holm) t.columns.push_back(p_name + "_holm");
    for (std::size_t i = 0; i < n_rows; ++i) {
      t.rows[i].push_back(opt_cell(stat[i]));
      t.rows[i].push_back(ids[i] >= 0 ? ReportCell{p[static_cast<std::size_t>(ids[i])]} : ReportCell{});
      if (with_holm) t.rows[i].push_back(opt_cell(holm[i]));
    }
  };

  {
    std::vector<double> p;
    std::vector<int> ids(n_rows, -1);
    for (std::size_t i = 0; i < n_rows; ++i) {
      if (summary.groups[i].rho_p) {
        ids[i] = static_cast<int>(p.size());
        p.push_back(*summary.groups[i].rho_p);
      }
    }
    const auto holm = holm_for_rows(p, ids);
    if (p.size() > 1) {
      t.columns.push_back("p_rho_holm");
      for (std::size_t i = 0; i < n_rows; ++i) t.rows[i].push_back(opt_cell(holm[i]));
    }
  }

  if (opt.compare_react) {
    using PairKey = std::tuple<std::string, std::string, std::string>;
    std::map<std::pair<harness::Method, std::size_t>, int> test_of;
    std::vector<double> p;
    std::vector<std::optional<double>> stat(n_rows);
    std::vector<int> ids(n_rows, -1);
    std::map<std::pair<harness::Method, std::size_t>, std::pair<double, double>> results;
    for (const auto& g : summary.groups) {
      const std::pair<harness::Method, std::size_t> mk{g.method, g.id_class_count};
      if (results.count(mk)) continue;
      const auto off = groups.find({g.method, false, g.id_class_count});
      const auto on = groups.find({g.method, true, g.id_class_count});
      if (off == groups.end() || on == groups.end()) continue;
      std::map<PairKey, double> off_by;
      for (const auto* r : off->second) off_by[{r->subject, r->ood_class, r->id_classes}] = r->auroc;
      std::vector<double> a, b;
      for (const auto* r : on->second) {
        const auto it = off_by.find({r->subject, r->ood_class, r->id_classes});
        if (it == off_by.end()) continue;
        a.push_back(it->second);
        b.push_back(r->auroc);
      }
      if (a.empty()) continue;
      const auto w = stats::wilcoxon_signed_rank(a, b);
      results[mk] = {w.statistic, w.p_value};
      test_of[mk] = static_cast<int>(p.size());
      p.push_back(w.p_value);
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
      const std::pair<harness::Method, std::size_t> mk{summary.groups[i].method, summary.groups[i].id_class_count};
      const auto it = results.find(mk);
      if (it == results.end()) continue;
      stat[i] = it->second.first;
      ids[i] = test_of[mk];
    }
    add_family("W_react", "p_react", stat, p, ids);
  }

  if (opt.by_class) {
    std::vector<double> p;
    std::vector<std::optional<double>> stat(n_rows);
    std::vector<int> ids(n_rows, -1);
    const auto order = class_order(records);
    for (std::size_t i = 0; i < n_rows; ++i) {
      const auto& g = summary.groups[i];
      const auto& rs = groups.at({g.method, g.react, g.id_class_count});
      std::vector<std::vector<double>> by;
      for (const auto& name : order) {
        std::vector<double> a;
        for (const auto* r : rs)
          if (r->ood_class == name) a.push_back(r->auroc);
        if (!a.empty()) by.push_back(std::move(a));
      }
      if (by.size() < 2) continue;
      const auto kw = stats::kruskal_wallis(by);
      stat[i] = kw.statistic;
      ids[i] = static_cast<int>(p.size());
      p.push_back(kw.p_value);
    }
    add_family("H_class", "p_class", stat, p, ids);
  }

  if (opt.compare_id_classes) {
    const std::size_t lo = *id_counts.begin();
    const std::size_t hi = *id_counts.rbegin();
    std::map<std::pair<harness::Method, bool>, std::pair<double, int>> results;
    std::vector<double> p;
    for (const auto& g : summary.groups) {
      const std::pair<harness::Method, bool> mk{g.method, g.react};
      if (results.count(mk)) continue;
      const auto a = groups.find({g.method, g.react, hi});
      const auto b = groups.find({g.method, g.react, lo});
      if (a == groups.end() || b == groups.end()) continue;
      const auto mw = stats::mann_whitney_u(aurocs(a->second), aurocs(b->second));
      results[mk] = {mw.statistic, static_cast<int>(p.size())};
      p.push_back(mw.p_value);
    }
    std::vector<std::optional<double>> stat(n_rows);
    std::vector<int> ids(n_rows, -1);
    for (std::size_t i = 0; i < n_rows; ++i) {
      const auto it = results.find({summary.groups[i].method, summary.groups[i].react});
      if (it == results.end()) continue;
      stat[i] = it->second.first;
      ids[i] = it->second.second;
    }
    add_family("U_id", "p_id", stat, p, ids);
  }
  return t;
}

std::string render(const ReportTable& table, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::csv: {
      for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
      out << '\n';
      for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_field(cell_text(row[c], format));
        out << '\n';
      }
      break;
    }
    case ReportFormat::json: {
      auto arr = nlohmann::json::array();
      for (const auto& row : table.rows) {
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
          const auto& cell = row[c];
          nlohmann::json v;
          if (const auto* s = std::get_if<std::string>(&cell)) v = *s;
          else if (const auto* d = std::get_if<double>(&cell)) v = *d;
          else if (const auto* n = std::get_if<std::size_t>(&cell)) v = *n;
          obj[table.columns[c]] = v;
        }
        arr.push_back(std::move(obj));
      }
      out << arr.dump(2) << '\n';
      break;
    }
    case ReportFormat::md: {
      out << '|';
      for (const auto& c : table.columns) out << ' ' << c << " |";
      out << "\n|";
      for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c < 2 ? " --- |" : " ---: |");
      out << '\n';
      for (const auto& row : table.rows) {
        out << '|';
        for (const auto& cell : row) out << ' ' << cell_text(cell, format) << " |";
        out << '\n';
      }
      break;
    }
  }
  return out.str();
}

}  // namespace loco::app
