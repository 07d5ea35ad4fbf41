#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "loco/app/commands.hpp"

namespace fs = std::filesystem;
using namespace loco;

namespace {

struct Args {
  std::string config;
  std::vector<std::string> data;
  std::string out;
  std::size_t jobs = 0;
  std::optional<std::uint64_t> seed;
  std::string format;
  bool compare_react = false;
  bool by_class = false;
  bool compare_id_classes = false;
};

app::RunConfig resolve(const Args& a, bool seed_is_synth) {
  app::RunConfig cfg = a.config.empty() ? app::RunConfig{} : app::load_config(a.config);
  if (!a.data.empty()) {
    cfg.data_paths.assign(a.data.begin(), a.data.end());
    cfg.synth.reset();
  }
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.jobs > 0) {
    cfg.experiment.jobs = a.jobs;
    cfg.jobs_set = true;
  }
  if (a.seed) {
    if (seed_is_synth) {
      require(cfg.synth.has_value(), ErrorCode::configuration, "--seed needs a [synth] section");
      cfg.synth->seed = *a.seed;
    } else {
      cfg.experiment.master_seed = *a.seed;
    }
  }
  if (!a.format.empty()) cfg.format = app::parse_report_format(a.format);
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* sub, Args& a, bool needs_config) {
  auto* c = sub->add_option("--config", a.config, "INI config file");
  if (needs_config) c->required();
  c->check(CLI::ExistingFile);
  sub->add_option("--data", a.data, "dataset directory (repeatable)");
  sub->add_option("--out", a.out, "output directory");
  sub->add_option("--jobs", a.jobs, "worker threads (default: available parallelism)");
  sub->add_option("--seed", a.seed, "overrides the config seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Leave-one-class-out OOD detection benchmark for epoched EEG"};
  cli.require_subcommand(1);
  Args a;

  auto* synth = cli.add_subcommand("synth", "write synthetic subjects as dataset directories");
  synth->add_option("--config", a.config, "INI config with a [synth] section")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", a.out, "output directory");
  synth->add_option("--seed", a.seed, "overrides synth.seed");

  auto* run = cli.add_subcommand("run", "run the experiment, write results.csv and summary.json");
  add_common(run, a, false);

  auto* tune = cli.add_subcommand("tune", "tune d-KNN k and DUQ on the first subject");
  add_common(tune, a, false);

  auto* report = cli.add_subcommand("report", "summarize one or more results.csv files");
  report->add_option("--data,results", a.data, "results.csv (repeatable)")->required()->check(CLI::ExistingFile);
  report->add_option("--format", a.format, "csv, json or md")->check(CLI::IsMember({"csv", "json", "md"}));
  report->add_option("--out", a.out, "write the report to this file");
  report->add_flag("--compare-react", a.compare_react, "Wilcoxon signed-rank, ReAct on vs off");
  report->add_flag("--by-class", a.by_class, "Kruskal-Wallis across OOD classes");
  report->add_flag("--compare-id-classes", a.compare_id_classes, "Mann-Whitney U, 3 vs 2 ID classes");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      auto cfg = resolve(a, true);
      for (const auto& dir : app::cmd_synth(cfg, cfg.out_dir)) std::cout << dir.string() << '\n';
    } else if (run->parsed()) {
      const auto out = app::cmd_run(resolve(a, false));
      std::cout << out.result.rows.size() << " rows from " << out.result.cells_attempted << " cells";
      if (!out.result.failures.empty()) std::cout << ", " << out.result.failures.size() << " failures";
      std::cout << "\n" << out.results_csv.string() << '\n' << out.summary_json.string() << '\n';
    } else if (tune->parsed()) {
      std::cout << app::cmd_tune(resolve(a, false)).string() << '\n';
    } else if (report->parsed()) {
      app::ReportOptions opt;
      opt.format = a.format.empty() ? app::ReportFormat::md : app::parse_report_format(a.format);
      opt.compare_react = a.compare_react;
      opt.by_class = a.by_class;
      opt.compare_id_classes = a.compare_id_classes;
      const std::vector<fs::path> files(a.data.begin(), a.data.end());
      const auto text = app::cmd_report(files, opt);
      if (a.out.empty()) {
        std::cout << text;
      } else {
        std::ofstream f(a.out, std::ios::binary);
        require(static_cast<bool>(f), ErrorCode::io, "cannot write " + a.out);
        f << text;
      }
    }
  } catch (const Error& e) {
    std::cerr << "loco-ood: " << e.what() << '\n';
    return app::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "loco-ood: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
