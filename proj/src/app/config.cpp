#include "loco/app/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "loco/error.hpp"

namespace loco::app {
namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    fail(ErrorCode::config_parse, "expected a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t parse_size(const std::string& v) { return static_cast<std::size_t>(parse_u64(v)); }

double parse_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || std::isnan(out))
    fail(ErrorCode::config_parse, "expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  fail(ErrorCode::config_parse, "expected true or false, got '" + v + "'");
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

data::SynthConfig& synth(RunConfig& c) {
  if (!c.synth) c.synth.emplace();
  return *c.synth;
}

struct Pending {
  std::optional<double> gamma;
  std::optional<std::size_t> centroid_size;
  std::optional<double> penalty;
};

using Setter = std::function<void(RunConfig&, Pending&, const std::string&)>;
using Table = std::map<std::string, std::map<std::string, Setter>>;

const Table& table() {
  static const Table t = [] {
    Table t;
    auto& ex = t["experiment"];
    ex["methods"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.methods.clear();
      for (const auto& m : parse_list(v)) c.experiment.methods.push_back(harness::parse_method(m));
    };
    ex["react"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.react = harness::parse_react_mode(v);
    };
    ex["react_percentile"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.scorer.react_percentile = parse_double(v);
    };
    ex["react_clamp"] = [](RunConfig& c, Pending&, const std::string& v) {
      if (v.empty() || v == "auto") c.experiment.react_clamp_override.reset();
      else c.experiment.react_clamp_override = parse_double(v);
    };
    ex["id_classes"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.id_class_count = parse_size(v);
    };
    ex["exclude_first_subject"] = [](RunConfig& c, Pending&, const std::string& v) {
      if (v == "auto") c.experiment.exclude_first_subject.reset();
      else c.experiment.exclude_first_subject = parse_bool(v);
    };
    ex["ood_classes"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.ood_classes.clear();
      for (const auto& s : parse_list(v)) c.experiment.ood_classes.push_back(static_cast<int>(parse_size(s)));
    };
    ex["master_seed"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.master_seed = parse_u64(v);
    };
    ex["jobs"] = [](RunConfig& c, Pending&, const std::string& v) {
      const std::size_t n = parse_size(v);
      c.jobs_set = n > 0;
      c.experiment.jobs = n > 0 ? n : 1;
    };

    auto& nn = t["extractor"];
    nn["hidden_dim"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.extractor.hidden1_dim = parse_size(v);
    };
    nn["embed_dim"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.extractor.embed_dim = parse_size(v);
    };
    nn["dropout_p"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.extractor.dropout_p = parse_double(v);
    };
    nn["learning_rate"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.extractor.learning_rate = parse_double(v);
    };
    nn["batch_size"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.extractor.batch_size = parse_size(v);
    };
    nn["max_epochs"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.extractor.max_epochs = parse_size(v);
    };
    nn["es_patience"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.extractor.es_patience = parse_size(v);
    };
    nn["lr_patience"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.extractor.lr_patience = parse_size(v);
    };

    auto& sc = t["scorers"];
    sc["mc_passes"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.scorer.mc_passes = parse_size(v);
    };
    sc["ensemble_size"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.scorer.ensemble_size = parse_size(v);
    };
    sc["energy_temperature"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.scorer.energy_temperature = parse_double(v);
    };
    sc["softmax_statistic"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.scorer.softmax_statistic = ood::parse_softmax_statistic(v);
    };

    t["dknn"]["k"] = [](RunConfig& c, Pending&, const std::string& v) {
      if (v == "auto") c.experiment.dknn_k_fixed.reset();
      else c.experiment.dknn_k_fixed = parse_size(v);
    };

    auto& duq = t["duq"];
    duq["trials"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_trials = parse_size(v);
    };
    duq["one_minus_gamma_min"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_space.one_minus_gamma_min = parse_double(v);
    };
    duq["one_minus_gamma_max"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_space.one_minus_gamma_max = parse_double(v);
    };
    duq["centroid_sizes"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_space.centroid_sizes.clear();
      for (const auto& s : parse_list(v)) c.experiment.duq_space.centroid_sizes.push_back(parse_size(s));
    };
    duq["penalty_min"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_space.penalty_min = parse_double(v);
    };
    duq["penalty_max"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_space.penalty_max = parse_double(v);
    };
    duq["learning_rate"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_train.learning_rate = parse_double(v);
    };
    duq["batch_size"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_train.batch_size = parse_size(v);
    };
    duq["max_epochs"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_train.max_epochs = parse_size(v);
    };
    duq["es_patience"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_train.es_patience = parse_size(v);
    };
    duq["lr_patience"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_train.lr_patience = parse_size(v);
    };
    duq["init_sigma"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.duq_train.init_sigma = parse_double(v);
    };
    duq["fixed_gamma"] = [](RunConfig&, Pending& p, const std::string& v) { p.gamma = parse_double(v); };
    duq["fixed_centroid_size"] = [](RunConfig&, Pending& p, const std::string& v) {
      p.centroid_size = parse_size(v);
    };
    duq["fixed_penalty"] = [](RunConfig&, Pending& p, const std::string& v) { p.penalty = parse_double(v); };

    auto& sp = t["split"];
    sp["train"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.cell.fractions.train = parse_double(v);
    };
    sp["val"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.cell.fractions.val = parse_double(v);
    };
    sp["test"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.cell.fractions.test = parse_double(v);
    };
    sp["std_floor"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.experiment.cell.std_floor = parse_double(v);
    };

    auto& sy = t["synth"];
    sy["mode"] = [](RunConfig& c, Pending&, const std::string& v) { synth(c).mode = data::parse_synth_mode(v); };
    sy["subjects"] = [](RunConfig& c, Pending&, const std::string& v) {
      synth(c);
      c.synth_subjects = parse_size(v);
    };
    sy["n_classes"] = [](RunConfig& c, Pending&, const std::string& v) { synth(c).n_classes = parse_size(v); };
    sy["trials_per_class"] = [](RunConfig& c, Pending&, const std::string& v) {
      synth(c).trials_per_class = parse_size(v);
    };
    sy["n_channels"] = [](RunConfig& c, Pending&, const std::string& v) { synth(c).n_channels = parse_size(v); };
    sy["n_samples"] = [](RunConfig& c, Pending&, const std::string& v) { synth(c).n_samples = parse_size(v); };
    sy["class_separation"] = [](RunConfig& c, Pending&, const std::string& v) {
      synth(c).class_separation = parse_double(v);
    };
    sy["noise_std"] = [](RunConfig& c, Pending&, const std::string& v) { synth(c).noise_std = parse_double(v); };
    sy["ood_geometry"] = [](RunConfig& c, Pending&, const std::string& v) {
      synth(c).ood_geometry = data::parse_ood_geometry(v);
    };
    sy["sampling_rate_hz"] = [](RunConfig& c, Pending&, const std::string& v) {
      synth(c).sampling_rate_hz = parse_double(v);
    };
    sy["seed"] = [](RunConfig& c, Pending&, const std::string& v) { synth(c).seed = parse_u64(v); };
    sy["subject"] = [](RunConfig& c, Pending&, const std::string& v) {
      require(!v.empty(), ErrorCode::config_parse, "subject prefix is empty");
      synth(c).subject = v;
    };

    t["data"]["paths"] = [](RunConfig& c, Pending&, const std::string& v) {
      c.data_paths.clear();
      for (const auto& s : parse_list(v)) c.data_paths.emplace_back(s);
    };

    auto& out = t["output"];
    out["dir"] = [](RunConfig& c, Pending&, const std::string& v) { c.out_dir = v; };
    out["format"] = [](RunConfig& c, Pending&, const std::string& v) { c.format = parse_report_format(v); };
    return t;
  }();
  return t;
}

std::string strip_code(const Error& e) {
  const std::string what = e.what();
  const auto pos = what.find(": ");
  return pos == std::string::npos ? what : what.substr(pos + 2);
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  if (name == "md") return ReportFormat::md;
  fail(ErrorCode::configuration, "unknown report format '" + std::string(name) + "' (csv, json, md)");
}

std::string_view to_string(ReportFormat f) noexcept {
  switch (f) {
    case ReportFormat::csv: return "csv";
    case ReportFormat::json: return "json";
    case ReportFormat::md: return "md";
  }
  return "csv";
}

void RunConfig::validate() const {
  experiment.validate();
  if (synth) {
    synth->validate();
    require(synth_subjects >= 1, ErrorCode::configuration, "synth.subjects must be at least 1");
  }
  require(!(synth && !data_paths.empty()), ErrorCode::configuration,
          "give either a [synth] section or data paths, not both");
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::config_parse, "line " + std::to_string(e.line()) + ": " + e.message());
  }

  RunConfig cfg;
  Pending pending;
  for (const auto& [section, body] : tree) {
    const auto sec = table().find(section);
    if (body.empty()) {
      fail(ErrorCode::config_parse, sec == table().end() ? "key '" + section + "' is outside any section"
                                                         : "section [" + section + "] is empty");
    }
    require(sec != table().end(), ErrorCode::config_parse, "unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      const auto it = sec->second.find(key);
      require(it != sec->second.end(), ErrorCode::config_parse, "unknown key '" + name + "'");
      try {
        it->second(cfg, pending, trim(node.data()));
      } catch (const Error& e) {
        fail(ErrorCode::config_parse, name + ": " + strip_code(e));
      }
    }
  }

  const int fixed = pending.gamma.has_value() + pending.centroid_size.has_value() + pending.penalty.has_value();
  require(fixed == 0 || fixed == 3, ErrorCode::config_parse,
          "duq.fixed_gamma, duq.fixed_centroid_size and duq.fixed_penalty must be given together");
  if (fixed == 3) cfg.experiment.duq_fixed = ood::DuqHyperparams{*pending.gamma, *pending.centroid_size, *pending.penalty};

  for (auto& p : cfg.data_paths)
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  if (cfg.out_dir.is_relative() && !cfg.out_dir.empty() && !base_dir.empty()) cfg.out_dir = base_dir / cfg.out_dir;

  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorCode::config_parse, strip_code(e));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::config_parse, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), path.parent_path());
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + strip_code(e));
  }
}

}  // namespace loco::app
