#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cash/dataset.hpp"
#include "cash/errors.hpp"
#include "cash/evaluator.hpp"
#include "cash/param_space.hpp"
#include "cash/random.hpp"

namespace cash {

// Source of per-fold losses. The learner-backed implementation is below;
// synthetic benchmarks implement this directly.
class FoldLossSource {
 public:
  virtual ~FoldLossSource() = default;
  virtual int fold_count() const = 0;
  virtual FoldLossRecord evaluate(const Config& cfg, int fold) = 0;
};

class LearnerCvSource : public FoldLossSource {
 public:
  LearnerCvSource(const Dataset& data, FoldPlan plan, long long train_budget, std::uint64_t seed,
                  std::optional<double> fold_wall_seconds = {})
      : data_(&data),
        plan_(std::move(plan)),
        train_budget_(train_budget),
        seed_(seed),
        wall_(fold_wall_seconds) {}

  int fold_count() const override { return plan_.k; }
  FoldLossRecord evaluate(const Config& cfg, int fold) override {
    return evaluate_fold(cfg, *data_, plan_, fold, train_budget_, seed_, wall_);
  }
  const FoldPlan& plan() const { return plan_; }

 private:
  const Dataset* data_;
  FoldPlan plan_;
  long long train_budget_;
  std::uint64_t seed_;
  std::optional<double> wall_;
};

// Budget-accounted gateway between a strategy and the loss source. Repeat
// (config, fold) requests hit the history cache and consume no budget.
class EvalBroker {
 public:
  EvalBroker(FoldLossSource& source, RunHistory& history, long long budget)
      : source_(&source), history_(&history), budget_left_(budget) {}

  int k() const { return source_->fold_count(); }
  long long budget_left() const { return budget_left_; }
  long long evaluations() const { return evaluations_; }

  // nullptr means the budget is exhausted (cache hits always succeed).
  const FoldLossRecord* evaluate(int config_id, int fold) {
    if (const auto* cached = history_->record(config_id, fold)) return cached;
    if (budget_left_ <= 0) return nullptr;
    FoldLossRecord rec = source_->evaluate(history_->config(config_id), fold);
    rec.config_id = config_id;
    rec.fold = fold;
    history_->append(rec);
    --budget_left_;
    ++evaluations_;
    return history_->record(config_id, fold);
  }

 private:
  FoldLossSource* source_;
  RunHistory* history_;
  long long budget_left_;
  long long evaluations_ = 0;
};

// One propose/evaluate/observe cycle per step. The default step evaluates
// the proposal on every fold; strategies that control fold counts (racing)
// override step() and drive the broker themselves.
class OptimizerStrategy {
 public:
  virtual ~OptimizerStrategy() = default;
  virtual void initialize(const ParamSpace& space, std::uint64_t seed) = 0;
  virtual Config propose(const RunHistory& history) = 0;
  virtual void observe(int config_id, const std::vector<FoldLossRecord>& step_records) = 0;
  virtual int incumbent_id(const RunHistory& history) const = 0;
  virtual double incumbent_loss(const RunHistory& history) const = 0;
  virtual bool finished() const { return false; }

  virtual void step(EvalBroker& broker, RunHistory& history) {
    const Config cfg = propose(history);
    const int id = history.register_config(cfg);
    std::vector<FoldLossRecord> recs;
    for (int f = 0; f < broker.k(); ++f) {
      const auto* r = broker.evaluate(id, f);
      if (!r) break;
      recs.push_back(*r);
    }
    observe(id, recs);
  }
};

struct RunResult {
  std::uint64_t seed = 0;
  long long evaluations = 0;
  int incumbent_id = -1;
  double incumbent_loss = std::numeric_limits<double>::infinity();
  Config incumbent;
  std::vector<TrajectoryPoint> trajectory;
  RunHistory history;
};

inline constexpr int max_stalled_steps = 64;

// Algorithm skeleton shared by every optimizer: propose, evaluate under the
// fold-evaluation budget, observe, track the incumbent.
inline RunResult run_smbo(OptimizerStrategy& strategy, const ParamSpace& space,
                          FoldLossSource& source, long long budget, std::uint64_t seed) {
  if (budget < source.fold_count())
    throw ConfigError("budget must cover at least one full cross-validation");
  RunResult result;
  result.seed = seed;
  EvalBroker broker(source, result.history, budget);
  strategy.initialize(space, seed);

  int stalled = 0;
  while (broker.budget_left() > 0 && !strategy.finished()) {
    const long long before = broker.evaluations();
    strategy.step(broker, result.history);
    const int inc = strategy.incumbent_id(result.history);
    if (inc >= 0)
      result.history.record_incumbent(broker.evaluations(), inc,
                                      strategy.incumbent_loss(result.history));
    if (broker.evaluations() == before) {
      if (++stalled >= max_stalled_steps) break;  // space exhausted
    } else {
      stalled = 0;
    }
  }

  result.evaluations = broker.evaluations();
  result.incumbent_id = strategy.incumbent_id(result.history);
  if (result.incumbent_id >= 0) {
    result.incumbent = result.history.config(result.incumbent_id);
    result.incumbent_loss = strategy.incumbent_loss(result.history);
  }
  result.trajectory = result.history.trajectory();
  return result;
}

// Pure random search: every proposal is a prior sample, each evaluated on
// all folds; the incumbent is the full-CV argmin.
class RandomSearchStrategy : public OptimizerStrategy {
 public:
  void initialize(const ParamSpace& space, std::uint64_t seed) override {
    space_ = &space;
    rng_ = std::make_unique<Rng>(mix_seed(seed, 0x7a2d));
    best_id_ = -1;
    best_loss_ = std::numeric_limits<double>::infinity();
  }

  Config propose(const RunHistory&) override { return sample_random(*space_, *rng_); }

  void observe(int config_id, const std::vector<FoldLossRecord>& recs) override {
    if (recs.empty() || static_cast<int>(recs.size()) < k_hint_) return;  // partial CV: skip
    double sum = 0.0;
    for (const auto& r : recs) sum += r.loss;
    const double mean = sum / static_cast<double>(recs.size());
    if (mean < best_loss_) {
      best_loss_ = mean;
      best_id_ = config_id;
    }
  }

  void step(EvalBroker& broker, RunHistory& history) override {
    k_hint_ = broker.k();
    OptimizerStrategy::step(broker, history);
  }

  int incumbent_id(const RunHistory&) const override { return best_id_; }
  double incumbent_loss(const RunHistory&) const override { return best_loss_; }

 private:
  const ParamSpace* space_ = nullptr;
  std::unique_ptr<Rng> rng_;
  int best_id_ = -1;
  double best_loss_ = std::numeric_limits<double>::infinity();
  int k_hint_ = -1;
};

// Index of the run whose incumbent has minimal loss; ties go to the lower
// seed.
inline std::size_t best_of_runs_index(std::span<const RunResult> runs) {
  if (runs.empty()) throw EmptyInput("run results");
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].incumbent_loss < runs[best].incumbent_loss ||
        (runs[i].incumbent_loss == runs[best].incumbent_loss && runs[i].seed < runs[best].seed))
      best = i;
  }
  return best;
}

inline const RunResult& best_of_runs(std::span<const RunResult> runs) {
  return runs[best_of_runs_index(runs)];
}

namespace detail {

// Average ranks (1-based) with ties sharing their mean rank.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Spearman rank correlation with average ranks for ties; nullopt (the
// undefined marker) when either sequence is constant.
inline std::optional<double> spearman_rank(std::span<const double> xs,
                                           std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw LengthMismatch(xs.size(), ys.size());
  const auto rx = detail::average_ranks(xs);
  const auto ry = detail::average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct OverfitSignal {
  std::vector<double> cv_losses;          // trajectory means seen by the optimizer
  std::vector<double> validation_losses;  // held-out losses of retrained incumbents
  std::optional<double> spearman;
};

// Retrains every trajectory incumbent on the optimizer's training data and
// scores it on the withheld validation slice.
inline OverfitSignal overfit_signal(const RunResult& run, const ParamSpace& space,
                                    const Dataset& inner_train, const Dataset& validation,
                                    long long train_budget, std::uint64_t seed) {
  (void)space;
  OverfitSignal signal;
  for (const auto& point : run.trajectory) {
    const Config& cfg = run.history.config(point.config_id);
    signal.cv_losses.push_back(point.cv_loss);
    try {
      const TrainedModel model =
          train(cfg, inner_train, train_budget, mix_seed(seed, 0x0f17));
      signal.validation_losses.push_back(misclassification_rate(model, validation));
    } catch (const BudgetExhausted&) {
      signal.validation_losses.push_back(1.0);
    }
  }
  if (signal.cv_losses.size() >= 2)
    signal.spearman = spearman_rank(signal.cv_losses, signal.validation_losses);
  return signal;
}

}  // namespace cash
