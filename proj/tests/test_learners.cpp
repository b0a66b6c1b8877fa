#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "cash/learners.hpp"
#include "cash/serialize.hpp"
#include "test_util.hpp"

using namespace cash;

namespace {

Dataset tiny(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
             int classes = 0, const std::vector<AttrKind>& kinds = {}) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  std::vector<AttrMeta> meta(d);
  for (std::size_t j = 0; j < d; ++j) {
    meta[j].name = "x" + std::to_string(j);
    meta[j].kind = j < kinds.size() ? kinds[j] : AttrKind::numeric;
    if (meta[j].kind == AttrKind::categorical) {
      double hi = 0.0;
      for (const auto& r : rows) hi = std::max(hi, r[j]);
      for (int l = 0; l <= static_cast<int>(hi); ++l)
        meta[j].levels.push_back("l" + std::to_string(l));
    }
  }
  int nc = classes;
  if (nc == 0)
    for (int y : labels) nc = std::max(nc, y + 1);
  std::vector<std::string> names;
  for (int c = 0; c < nc; ++c) names.push_back("c" + std::to_string(c));
  return Dataset("tiny", meta, names, rows, labels);
}

Config base_config(const std::string& id) {
  Config cfg;
  cfg.values["is_base"] = std::string("true");
  cfg.values["feat_sel"] = std::string("false");
  cfg.values["base"] = id;
  return cfg;
}

}  // namespace

TEST_CASE("zero_r predicts the majority class", "[learners]") {
  const auto data = tiny({{0.0}, {1.0}, {2.0}}, {0, 0, 1});
  const auto model = train(base_config("zero_r"), data);
  for (std::size_t i = 0; i < data.size(); ++i)
    REQUIRE(model.predict_one(data.row(i)) == 0);
}

TEST_CASE("zero_r training error equals one minus the majority frequency", "[learners]") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<int> hist(3, 0);
    for (int i = 0; i < 30; ++i) {
      rows.push_back({rng.uniform01()});
      labels.push_back(static_cast<int>(rng.index(3)));
      ++hist[labels.back()];
    }
    const auto data = tiny(rows, labels, 3);
    const auto model = train(base_config("zero_r"), data);
    const double expected = 1.0 - *std::max_element(hist.begin(), hist.end()) / 30.0;
    REQUIRE(misclassification_rate(model, data) == Catch::Approx(expected).margin(1e-15));
  }
}

TEST_CASE("knn with k=1 has zero training error on distinct points", "[learners]") {
  Rng rng(12);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 25; ++i) {
    rows.push_back({rng.uniform01() * 10.0, rng.uniform01() * 10.0});
    labels.push_back(static_cast<int>(rng.index(3)));
  }
  auto cfg = base_config("knn");
  cfg.values["base.knn.k"] = std::int64_t{1};
  cfg.values["base.knn.weight"] = std::string("uniform");
  const auto data = tiny(rows, labels, 3);
  const auto model = train(cfg, data);
  REQUIRE(misclassification_rate(model, data) == 0.0);
}

TEST_CASE("predict: constant model over arbitrary rows", "[learners]") {
  const auto data = tiny({{0.0}, {1.0}, {2.0}, {3.0}, {4.0}}, {2, 2, 2, 0, 1});
  const auto model = train(base_config("zero_r"), data);
  const auto preds =
      model.predict(std::vector<std::vector<double>>{{9.0}, {-1.0}, {0.5}, {7.0}, {3.3}});
  REQUIRE(preds == std::vector<int>{2, 2, 2, 2, 2});
}

TEST_CASE("predict: voting over identical bases matches the single base", "[learners]") {
  const auto data = testutil::make_blobs(40, 3, 2, 77);
  Config voting;
  voting.values["is_base"] = std::string("false");
  voting.values["feat_sel"] = std::string("false");
  voting.values["class"] = std::string("voting");
  voting.values["num_bases"] = std::string("3");
  for (int i = 1; i <= 3; ++i)
    voting.values["base_" + std::to_string(i)] = std::string("cart_tree");
  const auto ensemble = train(voting, data, no_budget_limit, 5);
  const auto single = train(base_config("cart_tree"), data, no_budget_limit, 5);
  for (std::size_t i = 0; i < data.size(); ++i)
    REQUIRE(ensemble.predict_one(data.row(i)) == single.predict_one(data.row(i)));
}

TEST_CASE("predict: naive bayes breaks symmetric ties toward class 0", "[learners]") {
  const auto data = tiny({{-1.0}, {1.0}}, {0, 1});
  auto cfg = base_config("naive_bayes");
  const auto model = train(cfg, data);
  REQUIRE(model.predict_one(std::vector<double>{0.0}) == 0);
}

TEST_CASE("predict: arity mismatch rejected", "[learners]") {
  const auto data = tiny({{0.0, 1.0}, {1.0, 0.0}}, {0, 1});
  const auto model = train(base_config("zero_r"), data);
  REQUIRE_THROWS_AS(model.predict_one(std::vector<double>{1.0}), ArityMismatch);
}

TEST_CASE("misclassification rate arithmetic", "[learners]") {
  const auto data = tiny({{0.},{1.},{2.},{3.},{4.},{5.},{6.},{7.},{8.},{9.}},
                         {0, 0, 0, 0, 0, 0, 0, 1, 1, 1});
  const auto model = train(base_config("zero_r"), data);  // predicts 0 everywhere
  REQUIRE(misclassification_rate(model, data) == Catch::Approx(0.3).margin(1e-15));

  const auto perfect = tiny({{0.0}, {1.0}}, {0, 1});
  auto knn = base_config("knn");
  knn.values["base.knn.k"] = std::int64_t{1};
  const auto m2 = train(knn, perfect);
  REQUIRE(misclassification_rate(m2, perfect) == 0.0);

  const auto flipped = tiny({{0.0}, {1.0}}, {1, 0});
  REQUIRE(misclassification_rate(m2, flipped) == 1.0);
}

TEST_CASE("feature selection: a label-copy attribute is the top pick", "[learners]") {
  // attribute 0 mirrors the label; attribute 1 is constant
  const auto data = tiny({{0.0, 3.0}, {0.0, 3.0}, {1.0, 3.0}, {1.0, 3.0}},
                         {0, 0, 1, 1});
  const auto scores = attribute_scores(FeatEval::info_gain, data);
  REQUIRE(scores[0] == Catch::Approx(std::log(2.0)).epsilon(1e-12));  // = H(Y)
  REQUIRE(scores[1] == 0.0);

  FeatSelConfig fc;
  fc.search = FeatSearch::ranker;
  fc.ranker_keep_fraction = 0.5;
  const auto sel = select_features(fc, data, 0);
  REQUIRE(sel.kept == std::vector<std::size_t>{0});
}

TEST_CASE("feature selection: hand-computed info gain on a 6-row fixture", "[learners]") {
  // A bins purely, B bins into two 3-row bins with 2:1 label mixes
  const auto data = tiny({{1.0, 3.0}, {1.0, 7.0}, {2.0, 3.0},
                          {5.0, 7.0}, {5.0, 3.0}, {6.0, 7.0}},
                         {0, 0, 0, 1, 1, 1});
  const double hy = std::log(2.0);
  const double h_mix = -(1.0 / 3.0) * std::log(1.0 / 3.0) - (2.0 / 3.0) * std::log(2.0 / 3.0);
  const auto scores = attribute_scores(FeatEval::info_gain, data);
  REQUIRE(scores[0] == Catch::Approx(hy).epsilon(1e-12));
  REQUIRE(scores[1] == Catch::Approx(hy - h_mix).epsilon(1e-12));

  FeatSelConfig fc;
  fc.search = FeatSearch::ranker;
  fc.ranker_keep_fraction = 0.5;
  const auto sel = select_features(fc, data, 0);
  REQUIRE(sel.kept == std::vector<std::size_t>{0});
}

TEST_CASE("feature selection: never empty, arity matches downstream", "[learners]") {
  const auto data = testutil::make_blobs(30, 5, 2, 4);
  for (const FeatSearch search : {FeatSearch::ranker, FeatSearch::greedy_forward}) {
    for (const FeatEval eval : {FeatEval::info_gain, FeatEval::pearson_correlation}) {
      FeatSelConfig fc;
      fc.search = search;
      fc.evaluator = eval;
      fc.ranker_keep_fraction = 0.4;
      const auto sel = select_features(fc, data, 0);
      REQUIRE(!sel.kept.empty());
      const auto reduced = sel.apply(data);
      REQUIRE(reduced.attr_count() == sel.kept.size());
      REQUIRE(reduced.size() == data.size());
    }
  }
}

TEST_CASE("train with feature selection wires the selector into predictions", "[learners]") {
  const auto data = testutil::make_blobs(60, 4, 2, 21);
  Config cfg = base_config("cart_tree");
  cfg.values["feat_sel"] = std::string("true");
  cfg.values["feat_search"] = std::string("ranker");
  cfg.values["feat_eval"] = std::string("info_gain");
  cfg.values["ranker.keep_fraction"] = 0.5;
  const auto model = train(cfg, data, no_budget_limit, 3);
  REQUIRE(model.selector().has_value());
  REQUIRE(model.selector()->kept.size() == 2);
  REQUIRE(model.arity() == 4);
  REQUIRE_NOTHROW(model.predict(data));
}

TEST_CASE("adaboost: weight distribution sums to one after every round", "[learners]") {
  const auto data = testutil::make_blobs(50, 2, 2, 8, 1.0);
  BudgetMeter meter;
  const auto impl = detail::train_adaboost("decision_stump", HpView(Config{}, "meta_base."),
                                           12, data, 3, meter);
  const auto* boosted = dynamic_cast<const detail::AdaBoostModel*>(impl.get());
  REQUIRE(boosted != nullptr);
  REQUIRE(!boosted->round_weight_sums.empty());
  for (double s : boosted->round_weight_sums)
    REQUIRE(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("adaboost: boosted stumps separate the diagonal fixture", "[learners]") {
  // 20 points, two features, separable by x0 + x1 but by no single stump
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int t = 0; t < 5; ++t) {
    const double a = t, b = t + 1;
    rows.push_back({a, b});
    labels.push_back(1);
    rows.push_back({b, a});
    labels.push_back(1);
    rows.push_back({-a, -b});
    labels.push_back(0);
    rows.push_back({-b, -a});
    labels.push_back(0);
  }
  const auto data = tiny(rows, labels, 2);

  // no single stump can separate
  BudgetMeter meter;
  const auto stump = detail::train_stump(data, {}, meter);
  double stump_wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (stump->predict_one(data.row(i)) != data.label(i)) ++stump_wrong;
  REQUIRE(stump_wrong > 0);

  Config cfg;
  cfg.values["is_base"] = std::string("false");
  cfg.values["feat_sel"] = std::string("false");
  cfg.values["class"] = std::string("adaboost_m1");
  cfg.values["meta_base"] = std::string("decision_stump");
  cfg.values["adaboost.iterations"] = std::int64_t{10};
  const auto model = train(cfg, data, no_budget_limit, 3);
  REQUIRE(misclassification_rate(model, data) == 0.0);
}

TEST_CASE("bagging: full-fraction single bag equals its base learner", "[learners]") {
  const auto data = testutil::make_blobs(40, 3, 2, 31);
  Config bag;
  bag.values["is_base"] = std::string("false");
  bag.values["feat_sel"] = std::string("false");
  bag.values["class"] = std::string("bagging");
  bag.values["meta_base"] = std::string("cart_tree");
  bag.values["bagging.iterations"] = std::int64_t{1};
  bag.values["bagging.fraction"] = 1.0;
  const auto bagged = train(bag, data, no_budget_limit, 9);
  const auto single = train(base_config("cart_tree"), data, no_budget_limit, 9);
  for (std::size_t i = 0; i < data.size(); ++i)
    REQUIRE(bagged.predict_one(data.row(i)) == single.predict_one(data.row(i)));
}

TEST_CASE("determinism: state hash and predictions repeat per (config, data, seed)",
          "[learners]") {
  const auto data = testutil::make_blobs(40, 3, 3, 17, 1.5);
  for (const auto& id : base_learner_ids()) {
    const auto cfg = base_config(id);
    const auto a = train(cfg, data, no_budget_limit, 42);
    const auto b = train(cfg, data, no_budget_limit, 42);
    INFO(id);
    REQUIRE(a.state_hash() == b.state_hash());
    REQUIRE(a.predict(data) == b.predict(data));
  }
}

TEST_CASE("budget: zero budget exhausts immediately for every learner", "[learners]") {
  const auto data = testutil::make_blobs(20, 2, 2, 3);
  for (const auto& id : base_learner_ids()) {
    INFO(id);
    REQUIRE_THROWS_AS(train(base_config(id), data, 0, 1), BudgetExhausted);
  }
}

TEST_CASE("degenerate single-class data trains a majority predictor", "[learners]") {
  const auto data = tiny({{0.0}, {1.0}, {2.0}}, {1, 1, 1}, 3);
  for (const auto& id : base_learner_ids()) {
    INFO(id);
    const auto model = train(base_config(id), data, no_budget_limit, 1);
    REQUIRE(model.predict_one(std::vector<double>{5.0}) == 1);
  }
}

TEST_CASE("space: the built-in learner space validates and wires the branches",
          "[learners]") {
  const auto space = space_of_learners();
  REQUIRE(space.root() == "is_base");

  Config base_side;
  base_side.values["is_base"] = std::string("true");
  base_side.values["feat_sel"] = std::string("false");
  const auto active1 = active_params(space, base_side);
  REQUIRE(active1.count("base") == 1);
  REQUIRE(active1.count("meta_base") == 0);
  REQUIRE(active1.count("num_bases") == 0);

  Config voting_side;
  voting_side.values["is_base"] = std::string("false");
  voting_side.values["feat_sel"] = std::string("false");
  voting_side.values["class"] = std::string("voting");
  voting_side.values["num_bases"] = std::string("3");
  const auto active2 = active_params(space, voting_side);
  for (int i = 1; i <= 3; ++i) REQUIRE(active2.count("base_" + std::to_string(i)) == 1);
  for (int i = 4; i <= 5; ++i) REQUIRE(active2.count("base_" + std::to_string(i)) == 0);
  REQUIRE(active2.count("meta_base") == 0);
}

TEST_CASE("space: the shipped space file matches the built-in definition", "[learners]") {
  const auto space = space_of_learners();
  const auto shipped = space_from_json(
      json::parse(read_text_file(std::filesystem::path(CASH_DATA_DIR) / "learner_space.json")));
  REQUIRE(space_to_json(shipped) == space_to_json(space));
}

TEST_CASE("space: sampled configs always train", "[learners]") {
  const auto space = space_of_learners();
  const auto data = testutil::make_blobs(24, 3, 2, 5);
  Rng rng(99);
  for (int i = 0; i < 30; ++i) {
    const Config cfg = sample_random(space, rng);
    REQUIRE_NOTHROW(check_config(space, cfg));
    const auto model = train(cfg, data, 4'000'000, 7);
    const auto preds = model.predict(data);
    for (int p : preds) {
      REQUIRE(p >= 0);
      REQUIRE(p < 2);
    }
  }
}
