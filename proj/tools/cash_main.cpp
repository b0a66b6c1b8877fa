// Command-line front end: `cash run`, `cash report`, `cash space`.

#include <algorithm>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cash/runner.hpp"
#include "cash/serialize.hpp"

namespace {

// CLI methods use hyphens; the library uses underscores.
std::string canonical_method(std::string m) {
  std::replace(m.begin(), m.end(), '-', '_');
  return m;
}

int run_command(const cash::ExperimentConfig& cfg) {
  const cash::Report report = cash::run_experiment(cfg);
  std::cout << "method:        " << report.method << "\n"
            << "runs:          " << report.runs << " (batch " << report.batch << ")\n"
            << "cv error:      " << report.bootstrap.cv_median * 100.0 << "%\n"
            << "test error:    " << report.bootstrap.test_median * 100.0 << "%\n";
  if (!cfg.out_dir.empty()) std::cout << "artifacts:     " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Combined algorithm selection and hyperparameter optimization"};
  app.require_subcommand(1);

  cash::ExperimentConfig cfg;
  std::string method = "smac";
  double fold_timeout = 0.0;

  auto* run = app.add_subcommand("run", "Run an optimization experiment");
  run->add_option("--data", cfg.data_path, "Dataset file (CSV or ARFF)")->required();
  run->add_option("--format", cfg.format, "csv | arff (default: by extension)")
      ->check(CLI::IsMember({"auto", "csv", "arff"}));
  run->add_option("--label", cfg.label_column, "CSV label column name or index");
  run->add_flag_callback("--no-header", [&] { cfg.has_header = false; },
                         "CSV file has no header row");
  run->add_option("--method", method,
                  "smac | tpe | random | random-grid | ex-def")
      ->check(CLI::IsMember({"smac", "tpe", "random", "random-grid", "ex-def", "random_grid",
                             "ex_def"}));
  run->add_option("--k", cfg.k, "Cross-validation folds");
  run->add_option("--budget", cfg.budget, "Fold evaluations per run")->required();
  run->add_option("--seeds", cfg.seeds, "Number of independent runs");
  run->add_option("--batch", cfg.batch, "Simulated parallel runs per bootstrap draw");
  run->add_option("--test-fraction", cfg.test_fraction, "Held-out test share");
  run->add_option("--valid-fraction", cfg.valid_fraction,
                  "Validation share of the training side");
  run->add_option("--seed", cfg.base_seed, "Base seed");
  run->add_option("--train-budget", cfg.train_budget,
                  "Instance evaluations per fold training");
  run->add_option("--fold-timeout", fold_timeout, "Wall-clock seconds per fold training");
  run->add_option("--bootstrap", cfg.bootstrap_samples, "Monte Carlo bootstrap samples");
  run->add_option("--bootstrap-seed", cfg.bootstrap_seed, "Bootstrap RNG seed");
  run->add_option("--workers", cfg.workers, "Parallel workers (or CASH_WORKERS)");
  run->add_option("--out", cfg.out_dir, "Artifact output directory")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Rebuild reports from artifacts");
  report->add_option("--in", report_dir, "Experiment output directory")->required();

  bool print_space = false;
  auto* space = app.add_subcommand("space", "The built-in learner space");
  space->add_flag("--print", print_space, "Print the space definition file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) {
      cfg.method = canonical_method(method);
      if (fold_timeout > 0.0) cfg.fold_timeout_s = fold_timeout;
      return run_command(cfg);
    }
    if (report->parsed()) {
      const auto reports = cash::rebuild_reports(report_dir);
      std::cout << cash::read_text_file(std::filesystem::path(report_dir) / "report.md");
      return 0;
    }
    if (space->parsed()) {
      if (!print_space) {
        std::cerr << "nothing to do (use --print)\n";
        return 2;
      }
      std::cout << cash::space_to_json(cash::space_of_learners()).dump(2) << "\n";
      return 0;
    }
  } catch (const cash::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const cash::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
