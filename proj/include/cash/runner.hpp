#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cash/baselines.hpp"
#include "cash/dataset.hpp"
#include "cash/errors.hpp"
#include "cash/learners.hpp"
#include "cash/serialize.hpp"
#include "cash/smac.hpp"
#include "cash/smbo.hpp"
#include "cash/tpe.hpp"

namespace cash {

struct ExperimentConfig {
  std::string data_path;
  std::string format = "auto";  // csv | arff | auto (by extension)
  std::string label_column = "class";
  bool has_header = true;
  std::string method = "smac";  // smac | tpe | random | random_grid | ex_def
  int k = 10;
  long long budget = 100;            // fold evaluations per run
  int seeds = 25;                    // independent runs
  int batch = 4;                     // simulated parallel runs per bootstrap draw
  double test_fraction = 0.3;
  double valid_fraction = 0.3;       // inner validation share of the training side
  std::uint64_t base_seed = 1;
  long long train_budget = no_budget_limit;  // instance evaluations per fold training
  std::optional<double> fold_timeout_s;
  long long bootstrap_samples = 100000;
  std::uint64_t bootstrap_seed = 1234;
  int workers = 0;  // 0: CASH_WORKERS env var, else 4
  std::string out_dir;
};

inline void validate_experiment(const ExperimentConfig& cfg) {
  static const std::vector<std::string> methods = {"smac", "tpe", "random", "random_grid",
                                                   "ex_def"};
  if (std::find(methods.begin(), methods.end(), cfg.method) == methods.end())
    throw ConfigError("unknown method: " + cfg.method);
  if (cfg.format != "auto" && cfg.format != "csv" && cfg.format != "arff")
    throw ConfigError("unknown format: " + cfg.format);
  if (cfg.k < 2) throw ConfigError("k must be at least 2");
  if (cfg.budget < cfg.k) throw ConfigError("budget must cover one full cross-validation");
  if (cfg.seeds < 1) throw ConfigError("need at least one seed");
  if (cfg.batch < 1 || cfg.batch > cfg.seeds)
    throw ConfigError("batch size must lie in [1, seeds]");
  if (cfg.test_fraction <= 0.0 || cfg.test_fraction >= 1.0)
    throw ConfigError("test fraction must lie in (0,1)");
  if (cfg.valid_fraction <= 0.0 || cfg.valid_fraction >= 1.0)
    throw ConfigError("validation fraction must lie in (0,1)");
  if (cfg.bootstrap_samples < 1) throw ConfigError("bootstrap sample count must be positive");
}

inline int worker_count(const ExperimentConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  if (const char* env = std::getenv("CASH_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 4;
}

inline std::unique_ptr<OptimizerStrategy> make_strategy(const std::string& method) {
  if (method == "smac") return std::make_unique<SmacStrategy>();
  if (method == "tpe") return std::make_unique<TpeStrategy>();
  if (method == "random") return std::make_unique<RandomSearchStrategy>();
  if (method == "random_grid") return std::make_unique<RandomGridStrategy>();
  if (method == "ex_def") return std::make_unique<ExDefStrategy>();
  throw ConfigError("unknown method: " + method);
}

inline Dataset load_dataset(const std::string& path, const std::string& format,
                            const std::string& label_column, bool has_header) {
  std::string fmt = format;
  if (fmt == "auto") {
    const auto ext = std::filesystem::path(path).extension().string();
    fmt = ext == ".arff" ? "arff" : "csv";
  }
  return fmt == "arff" ? load_arff(path) : load_csv(path, label_column, has_header);
}

// --- census -------------------------------------------------------------------

struct Census {
  std::map<std::string, double> learners;        // root-level choice
  std::map<std::string, double> meta_bases;      // base under adaboost_m1 / bagging
  std::map<std::string, double> feature_search;  // "none" or "search/eval"
};

inline Census classifier_census(std::span<const Config> incumbents) {
  if (incumbents.empty()) throw EmptyInput("incumbent configs");
  Census census;
  std::map<std::string, int> learners, metas, feats;
  int meta_total = 0;
  for (const auto& cfg : incumbents) {
    const HpView top(cfg, "");
    const bool is_base = top.str("is_base", "true") == "true";
    ++learners[is_base ? top.str("base", "?") : top.str("class", "?")];
    if (!is_base && top.str("class", "") != "voting") {
      ++metas[top.str("meta_base", "?")];
      ++meta_total;
    }
    if (top.str("feat_sel", "false") == "true")
      ++feats[top.str("feat_search", "?") + "/" + top.str("feat_eval", "?")];
    else
      ++feats["none"];
  }
  const double n = static_cast<double>(incumbents.size());
  for (const auto& [name, count] : learners) census.learners[name] = count / n;
  for (const auto& [name, count] : metas)
    census.meta_bases[name] = count / static_cast<double>(meta_total);
  for (const auto& [name, count] : feats) census.feature_search[name] = count / n;
  return census;
}

inline Census classifier_census(std::span<const RunResult> results) {
  std::vector<Config> incumbents;
  for (const auto& r : results) incumbents.push_back(r.incumbent);
  return classifier_census(incumbents);
}

// --- bootstrap aggregation ------------------------------------------------------

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw EmptyInput("median");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct BootstrapSummary {
  double cv_median = 0.0;
  double test_median = 0.0;
  bool exact = false;
  long long samples = 0;
};

inline constexpr long long bootstrap_exact_cap = 2'000'000;

// Simulates `batch` parallel runs by drawing runs with replacement and
// keeping the one with the best CV loss (ties to the lower seed). Small
// problems are enumerated exactly over all n^batch ordered batches; larger
// ones fall back to seeded Monte Carlo.
inline BootstrapSummary bootstrap_batches(std::span<const double> cv_losses,
                                          std::span<const double> test_losses,
                                          std::span<const std::uint64_t> seeds, int batch,
                                          long long mc_samples, std::uint64_t bootstrap_seed) {
  const std::size_t n = cv_losses.size();
  if (n == 0 || n != test_losses.size() || n != seeds.size())
    throw ConfigError("bootstrap inputs misaligned");

  auto better = [&](std::size_t a, std::size_t b) {
    if (cv_losses[a] != cv_losses[b]) return cv_losses[a] < cv_losses[b];
    return seeds[a] < seeds[b];
  };

  BootstrapSummary summary;
  long long total = 1;
  bool overflow = false;
  for (int i = 0; i < batch; ++i) {
    total *= static_cast<long long>(n);
    if (total > bootstrap_exact_cap) {
      overflow = true;
      break;
    }
  }

  std::vector<double> best_cv, best_test;
  if (!overflow) {
    summary.exact = true;
    summary.samples = total;
    best_cv.reserve(static_cast<std::size_t>(total));
    best_test.reserve(static_cast<std::size_t>(total));
    for (long long flat = 0; flat < total; ++flat) {
      long long rest = flat;
      std::size_t best = static_cast<std::size_t>(rest % static_cast<long long>(n));
      rest /= static_cast<long long>(n);
      for (int d = 1; d < batch; ++d) {
        const auto pick = static_cast<std::size_t>(rest % static_cast<long long>(n));
        rest /= static_cast<long long>(n);
        if (better(pick, best)) best = pick;
      }
      best_cv.push_back(cv_losses[best]);
      best_test.push_back(test_losses[best]);
    }
  } else {
    summary.exact = false;
    summary.samples = mc_samples;
    Rng rng(mix_seed(bootstrap_seed, 0xb007));
    best_cv.reserve(static_cast<std::size_t>(mc_samples));
    best_test.reserve(static_cast<std::size_t>(mc_samples));
    for (long long s = 0; s < mc_samples; ++s) {
      std::size_t best = rng.index(n);
      for (int d = 1; d < batch; ++d) {
        const std::size_t pick = rng.index(n);
        if (better(pick, best)) best = pick;
      }
      best_cv.push_back(cv_losses[best]);
      best_test.push_back(test_losses[best]);
    }
  }
  summary.cv_median = median_of(std::move(best_cv));
  summary.test_median = median_of(std::move(best_test));
  return summary;
}

// --- experiment -----------------------------------------------------------------

struct RunArtifact {
  RunResult result;
  OverfitSignal signal;
  double test_loss = 1.0;
};

struct Report {
  std::string method;
  std::string dataset;
  int runs = 0;
  int batch = 0;
  BootstrapSummary bootstrap;
  std::vector<std::optional<double>> spearman;  // per run
  Census census;
  std::vector<json> incumbents;  // seed, cv_loss, test_loss, config
};

namespace detail {

// The only routine that ever touches the held-out test set.
inline double final_test_loss(const Config& cfg, const Dataset& full_train, const Dataset& test,
                              long long train_budget, std::uint64_t seed) {
  try {
    const TrainedModel model = train(cfg, full_train, train_budget, mix_seed(seed, 0x7e57));
    return misclassification_rate(model, test);
  } catch (const BudgetExhausted&) {
    return 1.0;
  }
}

inline json run_artifact_to_json(const RunArtifact& artifact) {
  json j = run_result_to_json(artifact.result);
  j["schema"] = "cash.run.v1";
  json overfit;
  overfit["cv_losses"] = artifact.signal.cv_losses;
  overfit["validation_losses"] = artifact.signal.validation_losses;
  if (artifact.signal.spearman) overfit["spearman"] = *artifact.signal.spearman;
  else overfit["spearman"] = nullptr;
  j["overfit"] = overfit;
  j["test_loss"] = artifact.test_loss;
  return j;
}

inline json census_to_json(const Census& census) {
  return json{{"learners", census.learners},
              {"meta_bases", census.meta_bases},
              {"feature_search", census.feature_search}};
}

inline std::string format_percent(double loss) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", loss * 100.0);
  return buf;
}

inline json report_to_json(const Report& report) {
  json spearman = json::array();
  for (const auto& s : report.spearman) {
    if (s) spearman.push_back(*s);
    else spearman.push_back(nullptr);
  }
  return json{{"schema", "cash.report.v1"},
              {"method", report.method},
              {"dataset", report.dataset},
              {"runs", report.runs},
              {"batch", report.batch},
              {"bootstrap",
               {{"cv_median", report.bootstrap.cv_median},
                {"test_median", report.bootstrap.test_median},
                {"exact", report.bootstrap.exact},
                {"samples", report.bootstrap.samples}}},
              {"spearman", spearman},
              {"census", census_to_json(report.census)},
              {"incumbents", report.incumbents}};
}

inline std::string report_to_markdown(const Report& report) {
  std::string md;
  md += "# " + report.method + " on " + report.dataset + "\n\n";
  md += "| runs | batch | CV error (%) | test error (%) | median Spearman |\n";
  md += "|------|-------|--------------|----------------|------------------|\n";
  std::vector<double> rho;
  for (const auto& s : report.spearman)
    if (s) rho.push_back(*s);
  const std::string rho_str = rho.empty() ? "n/a" : format_percent(median_of(rho) / 100.0);
  md += "| " + std::to_string(report.runs) + " | " + std::to_string(report.batch) + " | " +
        format_percent(report.bootstrap.cv_median) + " | " +
        format_percent(report.bootstrap.test_median) + " | " + rho_str + " |\n\n";
  md += "## Chosen classifiers\n\n";
  for (const auto& [name, freq] : report.census.learners)
    md += "- " + name + ": " + format_percent(freq) + "%\n";
  if (!report.census.meta_bases.empty()) {
    md += "\n## Meta-method bases\n\n";
    for (const auto& [name, freq] : report.census.meta_bases)
      md += "- " + name + ": " + format_percent(freq) + "%\n";
  }
  md += "\n## Feature search/eval\n\n";
  for (const auto& [name, freq] : report.census.feature_search)
    md += "- " + name + ": " + format_percent(freq) + "%\n";
  return md;
}

}  // namespace detail

// Builds the report from per-run numbers only, so it can be reproduced
// bit-for-bit from serialized artifacts.
inline Report build_report(const std::string& method, const std::string& dataset,
                           std::span<const RunArtifact> artifacts, int batch,
                           long long bootstrap_samples, std::uint64_t bootstrap_seed) {
  Report report;
  report.method = method;
  report.dataset = dataset;
  report.runs = static_cast<int>(artifacts.size());
  report.batch = batch;

  std::vector<double> cv, test;
  std::vector<std::uint64_t> seeds;
  std::vector<Config> incumbents;
  for (const auto& a : artifacts) {
    cv.push_back(a.result.incumbent_loss);
    test.push_back(a.test_loss);
    seeds.push_back(a.result.seed);
    incumbents.push_back(a.result.incumbent);
    report.spearman.push_back(a.signal.spearman);
    report.incumbents.push_back(json{{"seed", a.result.seed},
                                     {"cv_loss", a.result.incumbent_loss},
                                     {"test_loss", a.test_loss},
                                     {"config", config_to_json(a.result.incumbent)}});
  }
  report.bootstrap = bootstrap_batches(cv, test, seeds, batch, bootstrap_samples, bootstrap_seed);
  report.census = classifier_census(incumbents);
  return report;
}

// Full experiment: split test data off, split the training side into the
// optimizer's share and a validation slice, fan seeded runs across workers,
// retrain each winner on the whole training side for test evaluation, and
// aggregate the bootstrap report.
inline Report run_experiment(const ExperimentConfig& cfg) {
  validate_experiment(cfg);
  const Dataset data = load_dataset(cfg.data_path, cfg.format, cfg.label_column, cfg.has_header);
  const ParamSpace space = space_of_learners();

  const auto [full_train, test] =
      split_train_test(data, cfg.test_fraction, mix_seed(cfg.base_seed, 0x7e5701));
  const auto [inner_opt, inner_valid] =
      split_train_test(full_train, cfg.valid_fraction, mix_seed(cfg.base_seed, 0x1a11d));

  const int n_runs = cfg.method == "ex_def" ? 1 : cfg.seeds;  // Ex-Def is deterministic
  const int batch = std::min(cfg.batch, n_runs);

  std::vector<RunArtifact> artifacts(static_cast<std::size_t>(n_runs));
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n_runs));
  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < n_runs; i = next.fetch_add(1)) {
      try {
        const std::uint64_t run_seed = cfg.base_seed + static_cast<std::uint64_t>(i);
        const FoldPlan plan = stratified_folds(inner_opt, cfg.k, run_seed);
        LearnerCvSource source(inner_opt, plan, cfg.train_budget, run_seed, cfg.fold_timeout_s);
        auto strategy = make_strategy(cfg.method);
        RunArtifact artifact;
        artifact.result = run_smbo(*strategy, space, source, cfg.budget, run_seed);
        artifact.signal = overfit_signal(artifact.result, space, inner_opt, inner_valid,
                                         cfg.train_budget, run_seed);
        artifact.test_loss = detail::final_test_loss(artifact.result.incumbent, full_train, test,
                                                     cfg.train_budget, run_seed);
        artifacts[static_cast<std::size_t>(i)] = std::move(artifact);
      } catch (...) {
        failures[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };

  const int threads = std::min(worker_count(cfg), n_runs);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  Report report = build_report(cfg.method, data.name(), artifacts, batch, cfg.bootstrap_samples,
                               cfg.bootstrap_seed);

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(cfg.out_dir) / cfg.method;
    fs::create_directories(dir);
    json exp;
    exp["schema"] = "cash.experiment.v1";
    exp["method"] = cfg.method;
    exp["dataset"] = {{"path", cfg.data_path},
                      {"name", data.name()},
                      {"instances", data.size()},
                      {"attributes", data.attr_count()},
                      {"classes", data.class_count()}};
    exp["k"] = cfg.k;
    exp["budget"] = cfg.budget;
    exp["seeds"] = n_runs;
    exp["batch"] = batch;
    exp["base_seed"] = cfg.base_seed;
    exp["test_fraction"] = cfg.test_fraction;
    exp["valid_fraction"] = cfg.valid_fraction;
    exp["train_budget"] = cfg.train_budget;
    exp["bootstrap_samples"] = cfg.bootstrap_samples;
    exp["bootstrap_seed"] = cfg.bootstrap_seed;
    write_text_file(dir / "experiment.json", exp.dump(2) + "\n");
    for (int i = 0; i < n_runs; ++i) {
      const auto& a = artifacts[static_cast<std::size_t>(i)];
      char tag[16];
      std::snprintf(tag, sizeof tag, "%04d", i);
      write_text_file(dir / (std::string("run_") + tag + ".json"),
                      detail::run_artifact_to_json(a).dump(2) + "\n");
      write_text_file(dir / (std::string("run_") + tag + ".history.jsonl"),
                      history_to_jsonl(a.result.history));
    }
    write_text_file(dir / "report.json", detail::report_to_json(report).dump(2) + "\n");
    write_text_file(dir / "report.md", detail::report_to_markdown(report));
  }
  return report;
}

// Rebuilds reports from serialized artifacts (no retraining) and writes a
// combined table across every method found under `dir`.
inline std::vector<Report> rebuild_reports(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<Report> reports;
  std::vector<fs::path> method_dirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "experiment.json"))
      method_dirs.push_back(entry.path());
  std::sort(method_dirs.begin(), method_dirs.end());

  std::string combined = "# Experiment summary\n\n";
  combined += "| method | runs | CV error (%) | test error (%) | median Spearman |\n";
  combined += "|--------|------|--------------|----------------|------------------|\n";
  for (const auto& mdir : method_dirs) {
    const json exp = json::parse(read_text_file(mdir / "experiment.json"));
    std::vector<RunArtifact> artifacts;
    for (int i = 0;; ++i) {
      char tag[16];
      std::snprintf(tag, sizeof tag, "%04d", i);
      const fs::path run_path = mdir / (std::string("run_") + tag + ".json");
      if (!fs::exists(run_path)) break;
      const json jr = json::parse(read_text_file(run_path));
      RunArtifact a;
      a.result.seed = jr.at("seed").get<std::uint64_t>();
      a.result.evaluations = jr.at("evaluations").get<long long>();
      a.result.incumbent_id = jr.at("incumbent").at("id").get<int>();
      a.result.incumbent_loss = jr.at("incumbent").at("cv_loss").get<double>();
      a.result.incumbent = config_from_json(jr.at("incumbent").at("config"));
      for (const auto& jt : jr.at("trajectory"))
        a.result.trajectory.push_back({jt.at("evaluations").get<long long>(),
                                       jt.at("config_id").get<int>(),
                                       jt.at("cv_loss").get<double>()});
      a.signal.cv_losses = jr.at("overfit").at("cv_losses").get<std::vector<double>>();
      a.signal.validation_losses =
          jr.at("overfit").at("validation_losses").get<std::vector<double>>();
      if (!jr.at("overfit").at("spearman").is_null())
        a.signal.spearman = jr.at("overfit").at("spearman").get<double>();
      a.test_loss = jr.at("test_loss").get<double>();
      const fs::path hist_path = mdir / (std::string("run_") + tag + ".history.jsonl");
      if (fs::exists(hist_path))
        a.result.history = history_from_jsonl(read_text_file(hist_path));
      artifacts.push_back(std::move(a));
    }
    Report report = build_report(exp.at("method").get<std::string>(),
                                 exp.at("dataset").at("name").get<std::string>(), artifacts,
                                 exp.at("batch").get<int>(),
                                 exp.at("bootstrap_samples").get<long long>(),
                                 exp.at("bootstrap_seed").get<std::uint64_t>());
    write_text_file(mdir / "report.json", detail::report_to_json(report).dump(2) + "\n");
    write_text_file(mdir / "report.md", detail::report_to_markdown(report));

    std::vector<double> rho;
    for (const auto& s : report.spearman)
      if (s) rho.push_back(*s);
    combined += "| " + report.method + " | " + std::to_string(report.runs) + " | " +
                detail::format_percent(report.bootstrap.cv_median) + " | " +
                detail::format_percent(report.bootstrap.test_median) + " | " +
                (rho.empty() ? std::string("n/a")
                             : detail::format_percent(median_of(rho) / 100.0)) +
                " |\n";
    reports.push_back(std::move(report));
  }
  if (reports.empty()) throw DataError("no experiment artifacts under " + dir);
  write_text_file(fs::path(dir) / "report.md", combined);
  return reports;
}

}  // namespace cash
