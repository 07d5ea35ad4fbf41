#include "loco/app/results_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "loco/error.hpp"

namespace loco::app {
namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

// RFC 4180 fields of one physical line; quoted fields may not span lines.
bool split_fields(const std::string& line, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return !quoted;
}

double parse_unit(const std::string& v, const std::string& where, const char* name) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size() && !v.empty(), ErrorCode::format_parse,
          where + ": " + name + " '" + v + "' is not a number");
  require(std::isfinite(out) && out >= 0.0 && out <= 1.0, ErrorCode::format_parse,
          where + ": " + name + " " + v + " is outside [0, 1]");
  return out;
}

}  // namespace

std::size_t ResultRecord::id_class_count() const {
  return id_classes.empty() ? 0 : static_cast<std::size_t>(std::count(id_classes.begin(), id_classes.end(), '|')) + 1;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<ResultRecord> to_records(std::span<const harness::ResultRow> rows) {
  std::vector<ResultRecord> out;
  out.reserve(rows.size());
  for (const auto& r : rows)
    out.push_back({r.subject, r.ood_class, r.id_classes, r.method, r.react, r.auroc, r.on_task_auroc, r.seed});
  return out;
}

void write_results_csv(std::ostream& out, std::span<const ResultRecord> records) {
  out << kResultsHeader << '\n';
  for (const auto& r : records) {
    out << quote(r.subject) << ',' << quote(r.ood_class) << ',' << quote(r.id_classes) << ','
        << harness::to_string(r.method) << ',' << (r.react ? 1 : 0) << ',' << format_double(r.auroc) << ','
        << format_double(r.on_task_auroc) << ',' << r.seed << '\n';
  }
}

void write_results_csv(const std::filesystem::path& path, std::span<const ResultRecord> records) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  write_results_csv(out, records);
  out.flush();
  require(static_cast<bool>(out), ErrorCode::io, "write failed: " + path.string());
}

std::vector<ResultRecord> read_results_csv(std::istream& in, std::string_view origin) {
  std::vector<ResultRecord> out;
  std::string line;
  std::vector<std::string> f;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (header) {
      require(line == kResultsHeader, ErrorCode::format_parse,
              where + ": expected header '" + std::string(kResultsHeader) + "'");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    require(split_fields(line, f), ErrorCode::format_parse, where + ": unterminated quoted field");
    require(f.size() == 8, ErrorCode::format_parse,
            where + ": expected 8 fields, got " + std::to_string(f.size()));
    ResultRecord r;
    r.subject = f[0];
    r.ood_class = f[1];
    r.id_classes = f[2];
    require(!r.subject.empty() && !r.ood_class.empty() && !r.id_classes.empty(), ErrorCode::format_parse,
            where + ": empty subject, ood_class or id_classes");
    try {
      r.method = harness::parse_method(f[3]);
    } catch (const Error&) {
      fail(ErrorCode::format_parse, where + ": unknown method '" + f[3] + "'");
    }
    require(f[4] == "0" || f[4] == "1", ErrorCode::format_parse, where + ": react must be 0 or 1");
    r.react = f[4] == "1";
    r.auroc = parse_unit(f[5], where, "auroc");
    r.on_task_auroc = parse_unit(f[6], where, "on_task_auroc");
    const auto [ptr, ec] = std::from_chars(f[7].data(), f[7].data() + f[7].size(), r.seed);
    require(ec == std::errc() && ptr == f[7].data() + f[7].size() && !f[7].empty(), ErrorCode::format_parse,
            where + ": seed '" + f[7] + "' is not an unsigned integer");
    out.push_back(std::move(r));
  }
  require(!header, ErrorCode::format_parse, std::string(origin) + ": empty file");
  return out;
}

std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot read " + path.string());
  return read_results_csv(in, path.string());
}

}  // namespace loco::app
