#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "loco/app/commands.hpp"
#include "loco/app/config.hpp"
#include "loco/app/report.hpp"
#include "loco/app/results_io.hpp"
#include "loco/data/dataset.hpp"
#include "temp_dir.hpp"

using namespace loco;
using namespace loco::app;
namespace fs = std::filesystem;

namespace {

const char* kFast = R"([experiment]
jobs = 1
[extractor]
max_epochs = 15
es_patience = 5
[scorers]
mc_passes = 4
ensemble_size = 2
[duq]
trials = 2
max_epochs = 8
[synth]
trials_per_class = 24
n_channels = 2
n_samples = 4
subjects = 3
)";

ErrorCode parse_code(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::run_failed;
}

std::string parse_message(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ResultRecord rec(std::string subject, std::string ood, harness::Method m, bool react, double auroc,
                 double on_task = 0.9, std::string ids = "a|b|c") {
  return {std::move(subject), std::move(ood), std::move(ids), m, react, auroc, on_task, 7};
}

const ReportCell& cell(const ReportTable& t, std::size_t row, const std::string& col) {
  const auto it = std::find(t.columns.begin(), t.columns.end(), col);
  REQUIRE(it != t.columns.end());
  return t.rows[row][static_cast<std::size_t>(it - t.columns.begin())];
}

bool has_column(const ReportTable& t, const std::string& col) {
  return std::find(t.columns.begin(), t.columns.end(), col) != t.columns.end();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LOCO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("reference config holds the defaults") {
    const auto cfg = load_config(fs::path(LOCO_SOURCE_DIR) / "configs" / "reference.ini");
    const harness::ExperimentConfig def;
    CHECK(cfg.experiment.methods == def.methods);
    CHECK(cfg.experiment.duq_trials == 30);
    CHECK(cfg.experiment.duq_space.one_minus_gamma_min == 1e-3);
    CHECK(cfg.experiment.duq_space.one_minus_gamma_max == 1e-1);
    CHECK(cfg.experiment.duq_space.centroid_sizes == std::vector<std::size_t>{32, 64, 128, 256});
    CHECK(cfg.experiment.duq_space.penalty_min == 1e-5);
    CHECK(cfg.experiment.duq_space.penalty_max == 5e-2);
    CHECK(cfg.experiment.scorer.react_percentile == 90.0);
    CHECK_FALSE(cfg.experiment.dknn_k_fixed.has_value());
    CHECK_FALSE(cfg.experiment.exclude_first_subject.has_value());
    CHECK_FALSE(cfg.jobs_set);
    REQUIRE(cfg.synth.has_value());
    CHECK(cfg.synth->class_separation == 10.0);
    CHECK(cfg.synth_subjects == 4);
    CHECK(cfg.format == ReportFormat::md);
  }
  SUBCASE("values") {
    const auto cfg = parse_config(
        "[experiment]\nmethods = energy, ddu\nreact = both\nreact_clamp = inf\nood_classes = 3, 0\n"
        "exclude_first_subject = false\nmaster_seed = 18446744073709551615\njobs = 3\n"
        "[dknn]\nk = 5\n[duq]\nfixed_gamma = 0.99\nfixed_centroid_size = 32\nfixed_penalty = 0.01\n"
        "[data]\npaths = a, b\n",
        "/base");
    CHECK(cfg.experiment.methods == std::vector<harness::Method>{harness::Method::energy, harness::Method::ddu});
    CHECK(cfg.experiment.react == harness::ReactMode::both);
    CHECK(std::isinf(*cfg.experiment.react_clamp_override));
    CHECK(cfg.experiment.ood_classes == std::vector<int>{3, 0});
    CHECK(cfg.experiment.exclude_first_subject == false);
    CHECK(cfg.experiment.master_seed == 18446744073709551615ULL);
    CHECK(cfg.experiment.jobs == 3);
    CHECK(cfg.jobs_set);
    CHECK(*cfg.experiment.dknn_k_fixed == 5);
    CHECK(cfg.experiment.duq_fixed->centroid_size == 32);
    CHECK(cfg.data_paths == std::vector<fs::path>{"/base/a", "/base/b"});
    CHECK_FALSE(cfg.synth.has_value());
  }
  SUBCASE("errors name the key") {
    CHECK(parse_code("[synth]\nmode = wavelets\n") == ErrorCode::config_parse);
    CHECK(parse_message("[synth]\nmode = wavelets\n").find("synth.mode") != std::string::npos);
    CHECK(parse_message("[extractor]\nhiden_dim = 3\n").find("extractor.hiden_dim") != std::string::npos);
    CHECK(parse_message("[extractr]\nx = 3\n").find("extractr") != std::string::npos);
    CHECK(parse_message("[duq]\ntrials = many\n").find("duq.trials") != std::string::npos);
    CHECK(parse_code("[duq]\nfixed_gamma = 0.9\n") == ErrorCode::config_parse);
    CHECK(parse_code("[synth]\nseed = 1\n[data]\npaths = x\n") == ErrorCode::config_parse);
    CHECK(parse_code("[experiment]\nmethods = softmax, softmax\n") == ErrorCode::config_parse);
    CHECK(parse_code("[split]\ntrain = 0.9\n") == ErrorCode::config_parse);
    CHECK(parse_code("[experiment]\nmaster_seed = -1\n") == ErrorCode::config_parse);
    CHECK(parse_code("[experiment]\nreact = maybe\n") == ErrorCode::config_parse);
    CHECK(parse_code("[experiment]\nmaster_seed = 1\nmaster_seed = 2\n") == ErrorCode::config_parse);
  }
}

TEST_CASE("results csv") {
  std::vector<ResultRecord> rs{rec("s,1", "left \"hand\"", harness::Method::duq, true, 0.1 + 0.2, 1.0),
                               rec("s2", "feet", harness::Method::dknn, false, 1.0 / 3.0, 0.0)};
  rs[1].seed = 18446744073709551615ULL;
  std::stringstream ss;
  write_results_csv(ss, rs);
  const std::string text = ss.str();
  CHECK(text.rfind(std::string(kResultsHeader) + "\n", 0) == 0);
  CHECK(read_results_csv(ss) == rs);

  auto expect_line = [](const std::string& body, const std::string& where) {
    std::stringstream in(std::string(kResultsHeader) + "\n" + body);
    try {
      read_results_csv(in, "r.csv");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::format_parse);
      CHECK(std::string(e.what()).find(where) != std::string::npos);
    }
  };
  expect_line("s,c,a|b,softmax,0,0.5,0.5,1\ns,c,a|b,softmax,0,0.5,1\n", "r.csv:3");
  expect_line("s,c,a|b,odin,0,0.5,0.5,1\n", "r.csv:2");
  expect_line("s,c,a|b,softmax,2,0.5,0.5,1\n", "r.csv:2");
  expect_line("s,c,a|b,softmax,0,1.5,0.5,1\n", "r.csv:2");
  expect_line("s,c,a|b,softmax,0,0.5,0.5,-3\n", "r.csv:2");
  std::stringstream bad_header("subject,ood\n");
  CHECK_THROWS_AS(read_results_csv(bad_header), Error);
}

TEST_CASE("summary statistics against a numpy oracle") {
  const std::vector<double> a{0.91, 0.55, 0.73, 0.62, 0.88, 0.97, 0.41, 0.66, 0.79, 0.58};
  const std::vector<double> b{0.35, 0.52, 0.48, 0.61, 0.44, 0.50, 0.57, 0.39, 0.63, 0.46};
  const std::vector<double> ot_a{0.95, 0.70, 0.81, 0.74, 0.90, 0.99, 0.60, 0.77, 0.85, 0.72};
  const std::vector<double> ot_b{0.80, 0.82, 0.79, 0.88, 0.81, 0.83, 0.86, 0.78, 0.90, 0.84};
  std::vector<ResultRecord> rs;
  for (std::size_t i = 0; i < 10; ++i) {
    rs.push_back(rec("s" + std::to_string(i), "c" + std::to_string(i % 2), harness::Method::energy, false, a[i], ot_a[i]));
    rs.push_back(rec("s" + std::to_string(i), "c" + std::to_string(i % 2), harness::Method::softmax, false, b[i], ot_b[i]));
  }
  const auto s = summarize(rs);
  REQUIRE(s.groups.size() == 2);
  const auto& sm = s.groups[0];
  const auto& en = s.groups[1];
  CHECK(sm.method == harness::Method::softmax);
  CHECK(sm.median == doctest::Approx(0.49).epsilon(1e-12));
  CHECK(sm.q1 == doctest::Approx(0.445).epsilon(1e-12));
  CHECK(sm.q3 == doctest::Approx(0.5575).epsilon(1e-12));
  CHECK(sm.iqr == doctest::Approx(0.11249999999999999).epsilon(1e-12));
  CHECK(sm.on_task_median == doctest::Approx(0.825).epsilon(1e-12));
  CHECK(*sm.rho == doctest::Approx(0.8303030303030302).epsilon(1e-12));
  CHECK(*sm.rho_p == doctest::Approx(0.0029402270232795065).epsilon(1e-9));
  CHECK(en.median == doctest::Approx(0.6950000000000001).epsilon(1e-12));
  CHECK(en.q1 == doctest::Approx(0.59).epsilon(1e-12));
  CHECK(en.q3 == doctest::Approx(0.8575).epsilon(1e-12));
  CHECK(en.iqr == doctest::Approx(0.26750000000000007).epsilon(1e-12));
  CHECK(en.on_task_median == doctest::Approx(0.79).epsilon(1e-12));
  CHECK(*en.rho == doctest::Approx(1.0));
  CHECK(s.by_class.size() == 4);
  CHECK(s.by_class[0].ood_class == "c0");

  const auto j = to_json(s);
  CHECK(j["methods"].size() == 2);
  CHECK(j["methods"][0]["median"].get<double>() == sm.median);
}

TEST_CASE("report tables") {
  SUBCASE("single method gives one row") {
    std::vector<ResultRecord> rs{rec("s1", "c0", harness::Method::ddu, false, 0.7),
                                 rec("s2", "c0", harness::Method::ddu, false, 0.9)};
    const auto t = build_report(rs, {});
    CHECK(t.rows.size() == 1);
    CHECK(std::get<double>(cell(t, 0, "median")) == doctest::Approx(0.8));
    CHECK(std::holds_alternative<std::monostate>(cell(t, 0, "rho")));
    CHECK_FALSE(has_column(t, "p_rho_holm"));
  }
  SUBCASE("identical react columns give p_react = 1") {
    std::vector<ResultRecord> rs;
    for (int i = 0; i < 6; ++i) {
      for (bool react : {false, true}) {
        rs.push_back(rec("s" + std::to_string(i), "c0", harness::Method::energy, react, 0.5 + 0.05 * i));
        rs.push_back(rec("s" + std::to_string(i), "c0", harness::Method::softmax, react, 0.4 + 0.03 * i));
      }
    }
    ReportOptions opt;
    opt.compare_react = true;
    const auto t = build_report(rs, opt);
    REQUIRE(t.rows.size() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(std::get<double>(cell(t, r, "p_react")) == 1.0);
      CHECK(std::get<double>(cell(t, r, "p_react_holm")) == 1.0);
    }
  }
  SUBCASE("react comparison needs both settings") {
    std::vector<ResultRecord> rs{rec("s1", "c0", harness::Method::ddu, false, 0.7)};
    ReportOptions opt;
    opt.compare_react = true;
    CHECK_THROWS_AS(build_report(rs, opt), Error);
  }
  SUBCASE("by class and id-class comparison") {
    std::vector<ResultRecord> rs;
    for (int i = 0; i < 4; ++i) {
      for (int c = 0; c < 3; ++c) {
        rs.push_back(rec("s" + std::to_string(i), "c" + std::to_string(c), harness::Method::duq, false,
                         0.3 + 0.2 * c + 0.01 * i, 0.9, "a|b|c"));
        rs.push_back(rec("s" + std::to_string(i), "c" + std::to_string(c), harness::Method::duq, false,
                         0.2 + 0.1 * c + 0.01 * i, 0.9, "a|b"));
      }
    }
    ReportOptions opt;
    opt.by_class = true;
    opt.compare_id_classes = true;
    const auto t = build_report(rs, opt);
    REQUIRE(t.rows.size() == 2);
    CHECK(has_column(t, "id_classes"));
    CHECK(std::get<std::size_t>(cell(t, 0, "id_classes")) == 2);
    CHECK(std::get<double>(cell(t, 0, "H_class")) > 0.0);
    CHECK(has_column(t, "p_class_holm"));
    const double u = std::get<double>(cell(t, 0, "U_id"));
    CHECK(u == std::get<double>(cell(t, 1, "U_id")));
    CHECK_FALSE(has_column(t, "p_id_holm"));
    for (auto f : {ReportFormat::csv, ReportFormat::json, ReportFormat::md}) CHECK_FALSE(render(t, f).empty());
    const auto j = nlohmann::json::parse(render(t, ReportFormat::json));
    CHECK(j.size() == 2);
    CHECK(j[0]["method"] == "duq");
  }
}

TEST_CASE("commands") {
  test::TempDir tmp;
  auto cfg = parse_config(kFast);

  SUBCASE("synth writes one directory per subject, reproducibly") {
    cfg.synth_subjects = 4;
    const auto a = cmd_synth(cfg, tmp.path() / "a");
    const auto b = cmd_synth(cfg, tmp.path() / "b");
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(fs::exists(a[i] / "manifest.json"));
      for (const char* f : {"manifest.json", "epochs.f32", "labels.u32"})
        CHECK(slurp(a[i] / f) == slurp(b[i] / f));
    }
    const auto d = data::load_dataset(a[2]);
    CHECK(d.subject == "synth-02");
  }
  SUBCASE("run writes results and summary, deterministic across jobs") {
    cfg.out_dir = tmp.path() / "r1";
    const auto one = cmd_run(cfg);
    CHECK(one.result.rows.size() == 2 * 4 * 7);
    const auto csv = slurp(one.results_csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 57);
    const auto summary = nlohmann::json::parse(slurp(one.summary_json));
    CHECK(summary["rows"] == 56);
    CHECK(summary["methods"].size() == 7);
    CHECK(summary["failures"].empty());
    CHECK(fs::exists(tmp.path() / "r1" / "tuning.json"));

    cfg.out_dir = tmp.path() / "r2";
    cfg.experiment.jobs = 3;
    cfg.jobs_set = true;
    CHECK(slurp(cmd_run(cfg).results_csv) == csv);

    cfg.out_dir = tmp.path() / "r3";
    cfg.experiment.react = harness::ReactMode::both;
    CHECK(cmd_run(cfg).result.rows.size() == 2 * 56);

    const auto md = cmd_report({one.results_csv}, {});
    CHECK(md.find("| dknn |") != std::string::npos);
  }
  SUBCASE("tune writes per-cell tuning") {
    cfg.out_dir = tmp.path() / "t";
    const auto path = cmd_tune(cfg);
    const auto j = nlohmann::json::parse(slurp(path));
    CHECK(j["tuning_subject"] == "synth-00");
    CHECK(j["cells"].size() == 4);
    CHECK(j["cells"][0]["duq_trials"].size() == 2);
    cfg.experiment.methods = {harness::Method::softmax};
    CHECK_THROWS_AS(cmd_tune(cfg), Error);
  }
  SUBCASE("exit codes") {
    CHECK(exit_code(ErrorCode::config_parse) == 2);
    CHECK(exit_code(ErrorCode::format_size_mismatch) == 3);
    CHECK(exit_code(ErrorCode::run_failed) == 4);
  }
}

TEST_CASE("command line") {
  test::TempDir tmp;
  const auto ini = tmp.path() / "fast.ini";
  std::ofstream(ini) << kFast;
  const auto bad = tmp.path() / "bad.ini";
  std::ofstream(bad) << "[synth]\nmode = wavelets\n";
  const std::string out = (tmp.path() / "out").string();

  CHECK(run_cli("synth --config " + ini.string() + " --out " + out + "/data") == 0);
  CHECK(fs::exists(fs::path(out) / "data" / "synth-02" / "manifest.json"));
  CHECK(run_cli("synth --config " + bad.string() + " --out " + out) == 2);
  CHECK(run_cli("run --bogus-flag") == 2);
  CHECK(run_cli("run --config " + ini.string() + " --out " + out + "/run --seed 5") == 0);
  CHECK(fs::exists(fs::path(out) / "run" / "results.csv"));
  CHECK(run_cli("report --data " + out + "/run/results.csv --format json --by-class --out " + out + "/r.json") == 0);
  CHECK(nlohmann::json::parse(slurp(fs::path(out) / "r.json")).size() == 7);

  // truncated epochs file: data error
  const auto epochs = fs::path(out) / "data" / "synth-01" / "epochs.f32";
  fs::resize_file(epochs, fs::file_size(epochs) - 4);
  CHECK(run_cli("run --config " + ini.string() + " --data " + out + "/data/synth-00 --data " + out +
                "/data/synth-01 --out " + out + "/run2") == 3);

  // malformed results row: parse error (data)
  const auto broken = fs::path(out) / "broken.csv";
  std::ofstream(broken) << kResultsHeader << "\nx,y\n";
  CHECK(run_cli("report --data " + broken.string()) == 3);
}
