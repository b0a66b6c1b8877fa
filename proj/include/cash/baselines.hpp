#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cash/evaluator.hpp"
#include "cash/learners.hpp"
#include "cash/param_space.hpp"
#include "cash/smbo.hpp"

namespace cash {

inline constexpr int grid_points_per_param = 10;

// Default-hyperparameter configs for the whole roster: every base learner,
// each meta-method over a default cart_tree base, and a one-member voting
// ensemble. Order is the roster order used for tie-breaking.
inline std::vector<Config> default_roster_configs(const ParamSpace& space) {
  std::vector<Config> out;
  for (const auto& id : base_learner_ids()) {
    Config partial;
    partial.values["is_base"] = std::string("true");
    partial.values["base"] = id;
    out.push_back(complete_with_defaults(space, partial));
  }
  for (const auto& id : meta_learner_ids()) {
    Config partial;
    partial.values["is_base"] = std::string("false");
    partial.values["class"] = id;
    out.push_back(complete_with_defaults(space, partial));
  }
  return out;
}

inline std::vector<std::string> roster_names() {
  std::vector<std::string> names = base_learner_ids();
  for (const auto& id : meta_learner_ids()) names.push_back(id);
  return names;
}

// Per-learner discretization of the base-learner subspaces: categorical
// hyperparameters keep all levels, numeric ones get at most
// `grid_points_per_param` evenly spaced values (log-spaced under log
// priors).
struct GridSpec {
  struct LearnerGrid {
    std::string learner;
    std::vector<std::string> param_names;           // full names, e.g. "base.knn.k"
    std::vector<std::vector<ParamValue>> values;    // grid axis per param
    long long size = 1;
  };
  std::vector<LearnerGrid> grids;
  long long total = 0;

  // Decodes a flat index over the union of all grids into a full config.
  Config config_at(const ParamSpace& space, long long flat) const {
    for (const auto& grid : grids) {
      if (flat >= grid.size) {
        flat -= grid.size;
        continue;
      }
      Config partial;
      partial.values["is_base"] = std::string("true");
      partial.values["base"] = grid.learner;
      for (std::size_t a = 0; a < grid.values.size(); ++a) {
        const auto axis = static_cast<long long>(grid.values[a].size());
        partial.values[grid.param_names[a]] = grid.values[a][static_cast<std::size_t>(flat % axis)];
        flat /= axis;
      }
      return complete_with_defaults(space, partial);
    }
    throw ConfigError("grid index out of range");
  }
};

namespace detail {

inline std::vector<ParamValue> grid_axis(const ParamSpec& p, int points) {
  std::vector<ParamValue> axis;
  switch (p.kind) {
    case DomainKind::categorical:
      for (const auto& level : p.levels) axis.push_back(level);
      break;
    case DomainKind::integer: {
      std::set<std::int64_t> values;
      const auto span = p.ihi - p.ilo + 1;
      if (span <= points) {
        for (std::int64_t v = p.ilo; v <= p.ihi; ++v) values.insert(v);
      } else if (p.prior == Prior::log_uniform) {
        const double llo = std::log(static_cast<double>(p.ilo));
        const double lhi = std::log(static_cast<double>(p.ihi));
        for (int i = 0; i < points; ++i) {
          const double x = llo + (lhi - llo) * i / (points - 1);
          values.insert(std::clamp(static_cast<std::int64_t>(std::llround(std::exp(x))),
                                   p.ilo, p.ihi));
        }
      } else {
        for (int i = 0; i < points; ++i) {
          const double x = static_cast<double>(p.ilo) +
                           static_cast<double>(p.ihi - p.ilo) * i / (points - 1);
          values.insert(std::clamp(static_cast<std::int64_t>(std::llround(x)), p.ilo, p.ihi));
        }
      }
      for (std::int64_t v : values) axis.push_back(v);
      break;
    }
    case DomainKind::real: {
      for (int i = 0; i < points; ++i) {
        double x;
        if (p.prior == Prior::log_uniform) {
          x = std::exp(std::log(p.lo) + (std::log(p.hi) - std::log(p.lo)) * i / (points - 1));
        } else {
          x = p.lo + (p.hi - p.lo) * i / (points - 1);
        }
        axis.push_back(std::clamp(x, p.lo, p.hi));
      }
      break;
    }
  }
  return axis;
}

}  // namespace detail

inline GridSpec build_grid(const ParamSpace& space, int points = grid_points_per_param) {
  GridSpec grid;
  for (const auto& id : base_learner_ids()) {
    GridSpec::LearnerGrid lg;
    lg.learner = id;
    const std::string prefix = "base." + id + ".";
    for (const auto& p : space.params()) {
      if (p.name.rfind(prefix, 0) != 0) continue;
      lg.param_names.push_back(p.name);
      lg.values.push_back(detail::grid_axis(p, points));
      lg.size *= static_cast<long long>(lg.values.back().size());
    }
    grid.total += lg.size;
    grid.grids.push_back(std::move(lg));
  }
  return grid;
}

// Enumerates a fixed candidate list, all folds each; the incumbent is the
// full-CV argmin with earlier candidates winning ties.
class CandidateListStrategy : public OptimizerStrategy {
 public:
  void initialize(const ParamSpace& space, std::uint64_t seed) override {
    space_ = &space;
    seed_ = seed;
    next_ = 0;
    best_id_ = -1;
    best_loss_ = std::numeric_limits<double>::infinity();
    reset_candidates();
  }

  Config propose(const RunHistory&) override { return candidate(next_++); }

  void observe(int config_id, const std::vector<FoldLossRecord>& recs) override {
    if (recs.empty() || static_cast<int>(recs.size()) < k_hint_) return;
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

 protected:
  virtual void reset_candidates() = 0;
  virtual Config candidate(long long index) = 0;

  const ParamSpace* space_ = nullptr;
  std::uint64_t seed_ = 0;

 private:
  long long next_ = 0;
  int best_id_ = -1;
  double best_loss_ = std::numeric_limits<double>::infinity();
  int k_hint_ = -1;
};

// Exhaustive cross-validation of the roster defaults.
class ExDefStrategy : public CandidateListStrategy {
 public:
  bool finished() const override {
    return done_ >= static_cast<long long>(roster_.size());
  }

 protected:
  void reset_candidates() override {
    roster_ = default_roster_configs(*space_);
    done_ = 0;
  }
  Config candidate(long long index) override {
    done_ = index + 1;
    return roster_[static_cast<std::size_t>(index)];
  }

 private:
  std::vector<Config> roster_;
  long long done_ = 0;
};

// Random search over the union of the per-learner grids, seeded with the
// roster defaults.
class RandomGridStrategy : public CandidateListStrategy {
 protected:
  void reset_candidates() override {
    roster_ = default_roster_configs(*space_);
    grid_ = build_grid(*space_);
    rng_ = std::make_unique<Rng>(mix_seed(seed_, 0x62d));
  }
  Config candidate(long long index) override {
    if (index < static_cast<long long>(roster_.size()))
      return roster_[static_cast<std::size_t>(index)];
    return grid_.config_at(*space_, rng_->uniform_int(0, grid_.total - 1));
  }

 private:
  std::vector<Config> roster_;
  GridSpec grid_;
  std::unique_ptr<Rng> rng_;
};

struct ExDefResult {
  Config best;
  std::size_t best_index = 0;
  std::vector<std::pair<std::string, double>> learner_losses;  // roster order
  RunResult run;
};

// Evaluates every roster member at default hyperparameters on all folds and
// returns the argmin (roster order breaks ties).
inline ExDefResult ex_def(const ParamSpace& space, FoldLossSource& source) {
  const auto roster = default_roster_configs(space);
  const auto names = roster_names();
  ExDefStrategy strategy;
  const long long budget =
      static_cast<long long>(roster.size()) * static_cast<long long>(source.fold_count());
  ExDefResult result;
  result.run = run_smbo(strategy, space, source, budget, 0);
  for (std::size_t i = 0; i < roster.size(); ++i) {
    std::vector<int> folds(static_cast<std::size_t>(source.fold_count()));
    std::iota(folds.begin(), folds.end(), 0);
    const int id = result.run.history.register_config(roster[i]);
    result.learner_losses.push_back({names[i], mean_cv_loss(result.run.history, id, folds)});
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.learner_losses.size(); ++i)
    if (result.learner_losses[i].second < result.learner_losses[best].second) best = i;
  result.best_index = best;
  result.best = roster[best];
  return result;
}

// Random grid search under a fold-evaluation budget; returns the best
// fully-evaluated candidate.
inline RunResult random_grid(const ParamSpace& space, FoldLossSource& source, long long budget,
                             std::uint64_t seed) {
  RandomGridStrategy strategy;
  return run_smbo(strategy, space, source, budget, seed);
}

}  // namespace cash
