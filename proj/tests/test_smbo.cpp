#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cash/smbo.hpp"
#include "synthetic_bench.hpp"
#include "test_util.hpp"

using namespace cash;

namespace {

// Independent Spearman oracle: O(n^2) average ranks plus naive Pearson.
std::optional<double> spearman_oracle(const std::vector<double>& xs,
                                      const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  auto ranks = [&](const std::vector<double>& v) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      double less = 0, equal = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (v[j] < v[i]) ++less;
        if (v[j] == v[i]) ++equal;
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto rx = ranks(xs), ry = ranks(ys);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("run_smbo: budget of 3k fully evaluates exactly 3 random configs", "[smbo]") {
  const auto space = testutil::synthetic_cash_space();
  testutil::SyntheticCashSource source(5);
  RandomSearchStrategy strategy;
  const RunResult result = run_smbo(strategy, space, source, 15, 7);
  REQUIRE(result.evaluations == 15);
  REQUIRE(result.history.config_count() == 3);
  double best = 2.0;
  for (int id = 0; id < 3; ++id) best = std::min(best, *result.history.mean_loss(id));
  REQUIRE(result.incumbent_loss == Catch::Approx(best).margin(1e-15));
}

TEST_CASE("run_smbo: budget of exactly k yields a single incumbent", "[smbo]") {
  const auto space = testutil::synthetic_cash_space();
  testutil::SyntheticCashSource source(5);
  RandomSearchStrategy strategy;
  const RunResult result = run_smbo(strategy, space, source, 5, 3);
  REQUIRE(result.history.config_count() == 1);
  REQUIRE(result.incumbent_id == 0);
}

TEST_CASE("run_smbo: identical seeds give identical trajectories", "[smbo]") {
  const auto space = testutil::synthetic_cash_space();
  auto once = [&](std::uint64_t seed) {
    testutil::SyntheticCashSource source(4);
    RandomSearchStrategy strategy;
    return run_smbo(strategy, space, source, 40, seed);
  };
  const RunResult a = once(11), b = once(11), c = once(12);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    REQUIRE(a.trajectory[i].config_id == b.trajectory[i].config_id);
    REQUIRE(a.trajectory[i].cv_loss == b.trajectory[i].cv_loss);
    REQUIRE(a.trajectory[i].evaluations == b.trajectory[i].evaluations);
  }
  REQUIRE(config_key(a.incumbent) == config_key(b.incumbent));
  (void)c;
}

TEST_CASE("run_smbo: budget accounting bounds", "[smbo]") {
  const auto space = testutil::synthetic_cash_space();
  const int k = 7;
  for (const long long budget : {7LL, 10LL, 23LL, 50LL}) {
    testutil::SyntheticCashSource source(k);
    RandomSearchStrategy strategy;
    const RunResult result = run_smbo(strategy, space, source, budget, 5);
    REQUIRE(result.evaluations <= budget);
    REQUIRE(result.evaluations >= budget - (k - 1));
  }
  testutil::SyntheticCashSource source(k);
  RandomSearchStrategy strategy;
  REQUIRE_THROWS_AS(run_smbo(strategy, space, source, k - 1, 5), ConfigError);
}

TEST_CASE("run_smbo: trajectory losses strictly decrease", "[smbo]") {
  const auto space = testutil::synthetic_cash_space();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    testutil::SyntheticCashSource source(5);
    RandomSearchStrategy strategy;
    const RunResult result = run_smbo(strategy, space, source, 100, seed);
    REQUIRE(!result.trajectory.empty());
    for (std::size_t i = 1; i < result.trajectory.size(); ++i)
      REQUIRE(result.trajectory[i].cv_loss < result.trajectory[i - 1].cv_loss);
    REQUIRE(result.trajectory.back().config_id == result.incumbent_id);
  }
}

TEST_CASE("broker: repeat requests hit the cache and cost no budget", "[smbo]") {
  testutil::SyntheticCashSource source(4);
  RunHistory history;
  EvalBroker broker(source, history, 10);
  Config cfg;
  cfg.values["algo"] = std::string("flat");
  const int id = history.register_config(cfg);
  const auto* first = broker.evaluate(id, 2);
  REQUIRE(first != nullptr);
  REQUIRE(broker.evaluations() == 1);
  const auto* again = broker.evaluate(id, 2);
  REQUIRE(again == first);
  REQUIRE(broker.evaluations() == 1);  // cache hit, nothing consumed
  REQUIRE(history.records().size() == 1);
}

TEST_CASE("best_of_runs: argmin with seed tie-break", "[smbo]") {
  std::vector<RunResult> runs(3);
  runs[0].seed = 1;
  runs[0].incumbent_loss = 0.2;
  runs[1].seed = 2;
  runs[1].incumbent_loss = 0.1;
  runs[2].seed = 3;
  runs[2].incumbent_loss = 0.3;
  REQUIRE(best_of_runs_index(runs) == 1);

  std::vector<RunResult> single(1);
  single[0].seed = 9;
  single[0].incumbent_loss = 0.5;
  REQUIRE(best_of_runs_index(single) == 0);

  std::vector<RunResult> tied(2);
  tied[0].seed = 7;
  tied[0].incumbent_loss = 0.4;
  tied[1].seed = 3;
  tied[1].incumbent_loss = 0.4;
  REQUIRE(best_of_runs_index(tied) == 1);  // seed 3

  REQUIRE_THROWS_AS(best_of_runs_index(std::vector<RunResult>{}), EmptyInput);
}

TEST_CASE("spearman: simple fixtures", "[smbo]") {
  const std::vector<double> a{1, 2, 3}, b{10, 20, 30}, c{30, 20, 10};
  REQUIRE(*spearman_rank(a, b) == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(*spearman_rank(a, c) == Catch::Approx(-1.0).margin(1e-15));
  const std::vector<double> x{1, 2, 3, 4}, y{2, 1, 4, 3};
  // rho = 1 - 6 * 4 / (4 * 15) = 0.6
  REQUIRE(*spearman_rank(x, y) == Catch::Approx(0.6).margin(1e-12));
}

TEST_CASE("spearman: errors and the undefined marker", "[smbo]") {
  const std::vector<double> a{1, 2, 3}, b{1, 2};
  REQUIRE_THROWS_AS(spearman_rank(a, b), LengthMismatch);
  const std::vector<double> constant{5, 5, 5};
  REQUIRE_FALSE(spearman_rank(constant, a).has_value());
  REQUIRE_FALSE(spearman_rank(a, constant).has_value());
}

TEST_CASE("spearman: agrees with the counting oracle on tied sequences", "[smbo]") {
  Rng rng(123);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.index(49);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = static_cast<double>(rng.uniform_int(0, 9));  // plenty of ties
      ys[i] = static_cast<double>(rng.uniform_int(0, 9));
    }
    const auto got = spearman_rank(xs, ys);
    const auto want = spearman_oracle(xs, ys);
    REQUIRE(got.has_value() == want.has_value());
    if (got) REQUIRE(*got == Catch::Approx(*want).margin(1e-12));
  }
}

TEST_CASE("spearman: rank invariance under monotone transforms", "[smbo]") {
  Rng rng(55);
  std::vector<double> xs(20), ys(20);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = rng.uniform(0.1, 5.0);
    ys[i] = rng.uniform(0.1, 5.0);
  }
  const double base = *spearman_rank(xs, ys);
  REQUIRE(*spearman_rank(xs, xs) == Catch::Approx(1.0).margin(1e-12));
  std::vector<double> ex(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ex[i] = std::exp(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  REQUIRE(*spearman_rank(ex, ly) == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("overfit_signal: degenerate one-point trajectory", "[smbo]") {
  const auto space = space_of_learners();
  const auto data = testutil::make_blobs(30, 2, 2, 3);
  const auto [inner, valid] = split_train_test(data, 0.3, 1);

  RunResult run;
  Config cfg;
  cfg.values["is_base"] = std::string("true");
  cfg.values["feat_sel"] = std::string("false");
  cfg.values["base"] = std::string("zero_r");
  const int id = run.history.register_config(cfg);
  run.trajectory.push_back({1, id, 0.5});
  const auto signal = overfit_signal(run, space, inner, valid, no_budget_limit, 1);
  REQUIRE(signal.cv_losses.size() == 1);
  REQUIRE(signal.validation_losses.size() == 1);
  REQUIRE_FALSE(signal.spearman.has_value());
}

TEST_CASE("overfit_signal: monotone fixture gives rho of one", "[smbo]") {
  const auto space = space_of_learners();
  const auto data = testutil::make_blobs(60, 2, 2, 13, 4.0);  // well separated
  const auto [inner, valid] = split_train_test(data, 0.3, 2);

  RunResult run;
  Config weak;  // majority vote: validation loss near the minority share
  weak.values["is_base"] = std::string("true");
  weak.values["feat_sel"] = std::string("false");
  weak.values["base"] = std::string("zero_r");
  Config strong;  // nearest neighbour separates the blobs
  strong.values["is_base"] = std::string("true");
  strong.values["feat_sel"] = std::string("false");
  strong.values["base"] = std::string("knn");
  strong.values["base.knn.k"] = std::int64_t{1};
  strong.values["base.knn.weight"] = std::string("uniform");
  const int weak_id = run.history.register_config(weak);
  const int strong_id = run.history.register_config(strong);
  run.trajectory.push_back({1, weak_id, 0.5});
  run.trajectory.push_back({2, strong_id, 0.0});

  const auto signal = overfit_signal(run, space, inner, valid, no_budget_limit, 5);
  REQUIRE(signal.validation_losses.size() == 2);
  REQUIRE(signal.validation_losses[0] > signal.validation_losses[1]);
  REQUIRE(*signal.spearman == Catch::Approx(1.0).margin(1e-12));
}
