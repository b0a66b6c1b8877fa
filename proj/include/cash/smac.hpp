#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "cash/evaluator.hpp"
#include "cash/param_space.hpp"
#include "cash/random.hpp"
#include "cash/smbo.hpp"

namespace cash {

// Fixed surrogate settings, one block.
struct ForestParams {
  int tree_count = 64;
  int min_leaf = 3;
  double feature_fraction = 5.0 / 6.0;
};

struct Posterior {
  double mu = 0.0;
  double sigma2 = 0.0;
};

// Regression forest over imputed feature vectors (encoded parameter slots
// plus activity flags).
class RegressionForest {
 public:
  struct Node {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };
  struct Tree {
    std::vector<Node> nodes;
    double predict(std::span<const double> x) const {
      int n = 0;
      while (nodes[n].feature >= 0)
        n = x[nodes[n].feature] <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
      return nodes[n].value;
    }
  };

  std::vector<Tree> trees;

  Posterior predict(std::span<const double> x) const {
    Posterior post;
    if (trees.empty()) return post;
    double sum = 0.0;
    bool all_equal = true;
    std::vector<double> preds(trees.size());
    for (std::size_t t = 0; t < trees.size(); ++t) {
      preds[t] = trees[t].predict(x);
      sum += preds[t];
      all_equal = all_equal && preds[t] == preds[0];
    }
    if (all_equal) {  // sigma2 is zero exactly iff every tree agrees
      post.mu = preds[0];
      return post;
    }
    post.mu = sum / static_cast<double>(trees.size());
    double s2 = 0.0;
    for (double p : preds) s2 += (p - post.mu) * (p - post.mu);
    post.sigma2 = s2 / static_cast<double>(trees.size());
    return post;
  }
};

namespace detail {

struct ForestData {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
};

inline void grow_regression_tree(RegressionForest::Tree& tree, const ForestData& data,
                                 std::vector<std::size_t> members, const ForestParams& params,
                                 Rng& rng, int depth) {
  const int node = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  double mean = 0.0;
  for (std::size_t i : members) mean += data.y[i];
  mean /= static_cast<double>(members.size());
  tree.nodes[node].value = mean;

  if (members.size() < 2 * static_cast<std::size_t>(params.min_leaf) || depth >= 30) return;
  double spread = 0.0;
  for (std::size_t i : members) spread = std::max(spread, std::abs(data.y[i] - mean));
  if (spread <= 1e-12) return;

  const std::size_t dims = data.x.front().size();
  std::vector<std::size_t> attrs(dims);
  std::iota(attrs.begin(), attrs.end(), std::size_t{0});
  const auto take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(params.feature_fraction * dims)));
  for (std::size_t i = 0; i < take && i + 1 < dims; ++i) {
    const std::size_t j = i + rng.index(dims - i);
    std::swap(attrs[i], attrs[j]);
  }
  attrs.resize(std::min(take, dims));
  std::sort(attrs.begin(), attrs.end());

  // best SSE-reducing split among the candidate features
  int best_feature = -1;
  double best_threshold = 0.0;
  double best_sse = std::numeric_limits<double>::infinity();
  {
    double base = 0.0;
    for (std::size_t i : members) base += (data.y[i] - mean) * (data.y[i] - mean);
    best_sse = base - 1e-15;
  }
  std::vector<std::size_t> order;
  for (std::size_t f : attrs) {
    order = members;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return data.x[a][f] < data.x[b][f]; });
    double lsum = 0.0, lsq = 0.0;
    double rsum = 0.0, rsq = 0.0;
    for (std::size_t i : members) {
      rsum += data.y[i];
      rsq += data.y[i] * data.y[i];
    }
    for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
      const double yv = data.y[order[pos]];
      lsum += yv;
      lsq += yv * yv;
      rsum -= yv;
      rsq -= yv * yv;
      const double v = data.x[order[pos]][f];
      const double next = data.x[order[pos + 1]][f];
      if (next <= v) continue;
      const auto nl = static_cast<double>(pos + 1);
      const auto nr = static_cast<double>(order.size() - pos - 1);
      if (nl < params.min_leaf || nr < params.min_leaf) continue;
      const double sse = (lsq - lsum * lsum / nl) + (rsq - rsum * rsum / nr);
      if (sse < best_sse) {
        best_sse = sse;
        best_feature = static_cast<int>(f);
        best_threshold = v + (next - v) / 2.0;
      }
    }
  }
  if (best_feature < 0) return;

  std::vector<std::size_t> left, right;
  for (std::size_t i : members)
    (data.x[i][best_feature] <= best_threshold ? left : right).push_back(i);
  members.clear();
  tree.nodes[node].feature = best_feature;
  tree.nodes[node].threshold = best_threshold;
  const int l = static_cast<int>(tree.nodes.size());
  grow_regression_tree(tree, data, std::move(left), params, rng, depth + 1);
  tree.nodes[node].left = l;
  const int r = static_cast<int>(tree.nodes.size());
  grow_regression_tree(tree, data, std::move(right), params, rng, depth + 1);
  tree.nodes[node].right = r;
}

}  // namespace detail

// Fits the surrogate on (imputed config, mean loss over evaluated folds)
// pairs, one per config with at least one record. Each tree sees a
// bootstrap resample and random feature subsets per split.
inline RegressionForest fit_forest(const RunHistory& history, const ParamSpace& space, Rng& rng,
                                   const ForestParams& params = {}) {
  detail::ForestData data;
  for (int id = 0; id < history.config_count(); ++id) {
    const auto mean = history.mean_loss(id);
    if (!mean) continue;
    data.x.push_back(impute_defaults(space, history.config(id)));
    data.y.push_back(*mean);
  }
  if (data.y.empty()) throw ConfigError("cannot fit a forest on an empty history");

  RegressionForest forest;
  forest.trees.resize(static_cast<std::size_t>(params.tree_count));
  const std::size_t n = data.y.size();
  for (auto& tree : forest.trees) {
    std::vector<std::size_t> bag(n);
    for (auto& i : bag) i = rng.index(n);
    detail::grow_regression_tree(tree, data, std::move(bag), params, rng, 0);
  }
  return forest;
}

inline Posterior predict(const RegressionForest& forest, const ParamSpace& space,
                         const Config& cfg) {
  return forest.predict(impute_defaults(space, cfg));
}

inline double normal_cdf(double u) { return 0.5 * std::erfc(-u * 0.70710678118654752440); }
inline double normal_pdf(double u) {
  return std::exp(-0.5 * u * u) * 0.39894228040143267794;
}

// Positive expected improvement over c_min under N(mu, sigma^2):
// sigma * (u * Phi(u) + phi(u)) with u = (c_min - mu) / sigma. The sigma = 0
// limit is the deterministic improvement max(c_min - mu, 0).
inline double expected_improvement(double mu, double sigma, double c_min) {
  if (sigma <= 0.0) return std::max(c_min - mu, 0.0);
  const double u = (c_min - mu) / sigma;
  const double ei = sigma * (u * normal_cdf(u) + normal_pdf(u));
  return std::max(ei, 0.0);
}

inline constexpr int acquisition_random_candidates = 1000;
inline constexpr int acquisition_starts = 10;
inline constexpr int acquisition_local_steps = 20;

// Acquisition maximization for the model-guided steps: score previously
// evaluated configs plus random samples, hill-climb from the best starts
// through the neighborhood move operator, return the overall EI argmax.
// `search_log` (optional) records (start EI, final EI) per local search.
inline Config propose_candidate(const RunHistory& history, const RegressionForest& forest,
                                const ParamSpace& space, double c_min, Rng& rng,
                                std::vector<std::pair<double, double>>* search_log = nullptr) {
  std::vector<Config> candidates;
  for (int id = 0; id < history.config_count(); ++id) candidates.push_back(history.config(id));
  for (int i = 0; i < acquisition_random_candidates; ++i)
    candidates.push_back(sample_random(space, rng));

  auto ei_of = [&](const Config& cfg) {
    const Posterior p = predict(forest, space, cfg);
    return expected_improvement(p.mu, std::sqrt(p.sigma2), c_min);
  };

  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) scores[i] = ei_of(candidates[i]);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  Config best = candidates[order[0]];
  double best_ei = scores[order[0]];
  const auto starts = std::min<std::size_t>(acquisition_starts, order.size());
  for (std::size_t s = 0; s < starts; ++s) {
    Config cur = candidates[order[s]];
    double cur_ei = scores[order[s]];
    const double start_ei = cur_ei;
    for (int stepno = 0; stepno < acquisition_local_steps; ++stepno) {
      auto moves = neighbors(space, cur, rng);
      double move_ei = cur_ei;
      int move_idx = -1;
      for (std::size_t m = 0; m < moves.size(); ++m) {
        const double e = ei_of(moves[m]);
        if (e > move_ei) {
          move_ei = e;
          move_idx = static_cast<int>(m);
        }
      }
      if (move_idx < 0) break;
      cur = std::move(moves[static_cast<std::size_t>(move_idx)]);
      cur_ei = move_ei;
    }
    if (search_log) search_log->push_back({start_ei, cur_ei});
    if (cur_ei > best_ei) {
      best_ei = cur_ei;
      best = std::move(cur);
    }
  }
  return best;
}

// Incumbent bookkeeping for the racing comparisons.
struct IncumbentState {
  int config_id = -1;
  std::vector<int> folds;  // evaluation order; grows monotonically
  double mean_loss = std::numeric_limits<double>::infinity();
};

// One challenger-vs-incumbent race, logged for audits.
struct RacingEvent {
  int challenger_id = -1;
  int incumbent_id = -1;
  std::vector<int> compared_folds;  // folds of the incumbent the challenger reached
  double challenger_mean = 0.0;
  double incumbent_mean = 0.0;
  bool promoted = false;
};

namespace detail {

inline int next_new_fold(const IncumbentState& state, int k) {
  for (int f = 0; f < k; ++f)
    if (std::find(state.folds.begin(), state.folds.end(), f) == state.folds.end()) return f;
  return -1;
}

inline void grow_incumbent(IncumbentState& state, EvalBroker& broker, const RunHistory& history) {
  const int nf = next_new_fold(state, broker.k());
  if (nf < 0) return;
  if (!broker.evaluate(state.config_id, nf)) return;
  state.folds.push_back(nf);
  state.mean_loss = mean_cv_loss(history, state.config_id, state.folds);
}

}  // namespace detail

// Races `challenger` against the incumbent fold by fold, in the incumbent's
// historical fold order. The challenger is dropped the first time its
// running mean over the shared folds exceeds the incumbent's mean over the
// same folds; completing the whole list with a strictly lower mean promotes
// it. Either way the surviving incumbent is evaluated on one new fold.
inline IncumbentState intensify(const Config& challenger, IncumbentState state,
                                EvalBroker& broker, RunHistory& history,
                                std::vector<RacingEvent>* events = nullptr) {
  const int cid = history.register_config(challenger);

  if (state.config_id < 0) {
    // first configuration seen: it becomes the incumbent on one fold
    if (const auto* r = broker.evaluate(cid, 0)) {
      state.config_id = cid;
      state.folds = {0};
      state.mean_loss = r->loss;
    }
    return state;
  }
  if (cid == state.config_id) {
    detail::grow_incumbent(state, broker, history);
    return state;
  }

  std::vector<int> shared;
  double challenger_sum = 0.0;
  bool aborted = false;
  bool budget_out = false;
  for (int f : state.folds) {
    const auto* r = broker.evaluate(cid, f);
    if (!r) {
      budget_out = true;
      break;
    }
    shared.push_back(f);
    challenger_sum += r->loss;
    const double challenger_mean = challenger_sum / static_cast<double>(shared.size());
    const double incumbent_mean = mean_cv_loss(history, state.config_id, shared);
    if (challenger_mean > incumbent_mean) {
      aborted = true;
      break;
    }
  }
  if (budget_out) return state;  // no decision without a complete comparison

  RacingEvent event;
  event.challenger_id = cid;
  event.incumbent_id = state.config_id;
  event.compared_folds = shared;
  event.challenger_mean = challenger_sum / static_cast<double>(shared.size());
  event.incumbent_mean = mean_cv_loss(history, state.config_id, shared);

  if (!aborted && shared.size() == state.folds.size() &&
      event.challenger_mean < event.incumbent_mean) {
    event.promoted = true;
    state.config_id = cid;
    state.mean_loss = event.challenger_mean;
  }
  if (events) events->push_back(event);

  detail::grow_incumbent(state, broker, history);
  return state;
}

// SMAC-style optimizer: random-forest surrogate with EI acquisition, every
// second proposal drawn at random, and fold-racing intensification.
class SmacStrategy : public OptimizerStrategy {
 public:
  explicit SmacStrategy(ForestParams params = {}) : params_(params) {}

  void initialize(const ParamSpace& space, std::uint64_t seed) override {
    space_ = &space;
    rng_ = std::make_unique<Rng>(mix_seed(seed, 0x57ac));
    state_ = IncumbentState{};
    events_.clear();
    steps_ = 0;
  }

  Config propose(const RunHistory& history) override {
    ++steps_;
    const bool random_step = steps_ % 2 == 1;  // the first proposal is random
    bool have_observation = false;
    for (int id = 0; id < history.config_count() && !have_observation; ++id)
      have_observation = history.mean_loss(id).has_value();
    if (random_step || !have_observation) return sample_random(*space_, *rng_);
    const RegressionForest forest = fit_forest(history, *space_, *rng_, params_);
    return propose_candidate(history, forest, *space_, state_.mean_loss, *rng_);
  }

  void observe(int, const std::vector<FoldLossRecord>&) override {}

  void step(EvalBroker& broker, RunHistory& history) override {
    const Config cfg = propose(history);
    state_ = intensify(cfg, state_, broker, history, &events_);
    observe(state_.config_id, {});
  }

  int incumbent_id(const RunHistory&) const override { return state_.config_id; }
  double incumbent_loss(const RunHistory&) const override { return state_.mean_loss; }

  const IncumbentState& incumbent_state() const { return state_; }
  const std::vector<RacingEvent>& racing_events() const { return events_; }

 private:
  ForestParams params_;
  const ParamSpace* space_ = nullptr;
  std::unique_ptr<Rng> rng_;
  IncumbentState state_;
  std::vector<RacingEvent> events_;
  long long steps_ = 0;
};

}  // namespace cash
