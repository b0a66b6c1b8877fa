#include <catch2/catch_amalgamated.hpp>

#include "cash/evaluator.hpp"
#include "cash/serialize.hpp"
#include "test_util.hpp"

using namespace cash;

namespace {

Config zero_r_config() {
  Config cfg;
  cfg.values["is_base"] = std::string("true");
  cfg.values["feat_sel"] = std::string("false");
  cfg.values["base"] = std::string("zero_r");
  return cfg;
}

Dataset six_four() {
  std::vector<AttrMeta> meta{{"x", AttrKind::numeric, {}}};
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({static_cast<double>(i)});
    labels.push_back(i < 6 ? 0 : 1);
  }
  return Dataset("sixfour", meta, {"a", "b"}, rows, labels);
}

}  // namespace

TEST_CASE("evaluate_fold: majority learner loses the minority fraction", "[evaluator]") {
  const auto data = six_four();
  const FoldPlan plan = stratified_folds(data, 2, 23);  // each fold: 3 of class 0, 2 of class 1
  const auto rec = evaluate_fold(zero_r_config(), data, plan, 0, no_budget_limit, 1);
  REQUIRE(rec.loss == Catch::Approx(0.4).margin(1e-15));
  REQUIRE_FALSE(rec.budget_exhausted);
}

TEST_CASE("evaluate_fold: zero budget maps to full loss", "[evaluator]") {
  const auto data = six_four();
  const FoldPlan plan = stratified_folds(data, 2, 23);
  const auto rec = evaluate_fold(zero_r_config(), data, plan, 0, 0, 1);
  REQUIRE(rec.loss == 1.0);
  REQUIRE(rec.budget_exhausted);
}

TEST_CASE("evaluate_fold: deterministic given identical inputs", "[evaluator]") {
  const auto data = testutil::make_blobs(30, 3, 2, 5);
  const FoldPlan plan = stratified_folds(data, 3, 7);
  Config cfg;
  cfg.values["is_base"] = std::string("true");
  cfg.values["feat_sel"] = std::string("false");
  cfg.values["base"] = std::string("random_forest");
  cfg.values["base.random_forest.trees"] = std::int64_t{8};
  cfg.values["base.random_forest.feature_fraction"] = 0.7;
  const auto a = evaluate_fold(cfg, data, plan, 1, no_budget_limit, 99);
  const auto b = evaluate_fold(cfg, data, plan, 1, no_budget_limit, 99);
  REQUIRE(a.loss == b.loss);
  REQUIRE(a.budget_exhausted == b.budget_exhausted);
}

TEST_CASE("mean_cv_loss arithmetic and errors", "[evaluator]") {
  RunHistory history;
  Config cfg = zero_r_config();
  const int id = history.register_config(cfg);
  history.append({id, 0, 0.1, false, 0.0});
  history.append({id, 1, 0.3, false, 0.0});
  const std::vector<int> both{0, 1};
  REQUIRE(mean_cv_loss(history, id, both) == Catch::Approx(0.2).margin(1e-15));
  const std::vector<int> one{1};
  REQUIRE(mean_cv_loss(history, id, one) == Catch::Approx(0.3).margin(1e-15));
  const std::vector<int> missing{0, 2};
  REQUIRE_THROWS_AS(mean_cv_loss(history, id, missing), MissingFold);
}

TEST_CASE("mean_cv_loss matches an independent summation over ten folds", "[evaluator]") {
  RunHistory history;
  const int id = history.register_config(zero_r_config());
  Rng rng(8);
  std::vector<int> folds;
  double sum = 0.0;
  for (int f = 0; f < 10; ++f) {
    const double loss = rng.uniform01();
    history.append({id, f, loss, false, 0.0});
    folds.push_back(f);
    sum += loss;
  }
  double oracle = 0.0;  // pairwise-summed recomputation from the raw records
  for (int f = 9; f >= 0; --f) oracle += history.record(id, f)->loss;
  oracle /= 10.0;
  REQUIRE(std::abs(mean_cv_loss(history, id, folds) - oracle) <= 1e-15);
  REQUIRE(std::abs(mean_cv_loss(history, id, folds) - sum / 10.0) <= 1e-15);
}

TEST_CASE("history: duplicate fold records rejected", "[evaluator]") {
  RunHistory history;
  const int id = history.register_config(zero_r_config());
  history.append({id, 0, 0.5, false, 0.0});
  REQUIRE_THROWS_AS(history.append({id, 0, 0.4, false, 0.0}), ConfigError);
}

TEST_CASE("history: config registry deduplicates by content", "[evaluator]") {
  RunHistory history;
  Config a = zero_r_config();
  Config b = zero_r_config();
  REQUIRE(history.register_config(a) == history.register_config(b));
  b.values["base"] = std::string("one_r");
  REQUIRE(history.register_config(a) != history.register_config(b));
}

TEST_CASE("history: every recorded loss lies in [0,1]", "[evaluator]") {
  const auto data = testutil::make_blobs(24, 2, 2, 9);
  const FoldPlan plan = stratified_folds(data, 4, 2);
  const auto space = space_of_learners();
  Rng rng(41);
  RunHistory history;
  for (int i = 0; i < 10; ++i) {
    const Config cfg = sample_random(space, rng);
    const int id = history.register_config(cfg);
    for (int f = 0; f < 2; ++f) {
      auto rec = evaluate_fold(cfg, data, plan, f, 200'000, 3);
      rec.config_id = id;
      history.append(rec);
      REQUIRE(rec.loss >= 0.0);
      REQUIRE(rec.loss <= 1.0);
    }
  }
  for (int id = 0; id < history.config_count(); ++id) {
    const auto mean = history.mean_loss(id);
    REQUIRE(mean.has_value());
    REQUIRE(*mean >= 0.0);
    REQUIRE(*mean <= 1.0);
  }
}

TEST_CASE("history: serialization replays to an identical history", "[evaluator]") {
  const auto space = space_of_learners();
  Rng rng(4);
  RunHistory history;
  for (int i = 0; i < 6; ++i) {
    const int id = history.register_config(sample_random(space, rng));
    for (int f = 0; f < 3; ++f) {
      if (history.record(id, f)) continue;
      history.append({id, f, rng.uniform01(), false, rng.uniform01()});
    }
  }
  history.record_incumbent(3, 0, 0.9);
  history.record_incumbent(6, 1, 0.4);

  const std::string text = history_to_jsonl(history);
  const RunHistory replayed = history_from_jsonl(text);
  REQUIRE(replayed.config_count() == history.config_count());
  REQUIRE(replayed.records().size() == history.records().size());
  for (std::size_t i = 0; i < history.records().size(); ++i) {
    REQUIRE(replayed.records()[i].config_id == history.records()[i].config_id);
    REQUIRE(replayed.records()[i].fold == history.records()[i].fold);
    REQUIRE(replayed.records()[i].loss == history.records()[i].loss);
  }
  for (int id = 0; id < history.config_count(); ++id)
    REQUIRE(config_key(replayed.config(id)) == config_key(history.config(id)));
  REQUIRE(replayed.trajectory().size() == history.trajectory().size());
  // and the replay round-trips byte-identically
  REQUIRE(history_to_jsonl(replayed) == text);
}
