#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "cash/evaluator.hpp"
#include "cash/param_space.hpp"
#include "cash/random.hpp"
#include "cash/smac.hpp"  // normal_cdf / normal_pdf
#include "cash/smbo.hpp"

namespace cash {

inline constexpr double tpe_default_gamma = 0.15;
inline constexpr int tpe_default_candidates = 24;
inline constexpr double parzen_bandwidth_floor_fraction = 1e-3;

// Observed configs partitioned at the gamma-quantile threshold: `good`
// holds ids with loss strictly below it.
struct HistorySplit {
  std::vector<int> good;
  std::vector<int> bad;
  double threshold = 0.0;
};

// Splits per-config mean losses at the empirical gamma-quantile. The
// threshold is the loss ranked ceil(gamma * m) in ascending 0-based order,
// so with distinct losses exactly ceil(gamma * m) observations are good.
inline HistorySplit split_history(const RunHistory& history, double gamma) {
  std::vector<std::pair<double, int>> observed;
  for (int id = 0; id < history.config_count(); ++id) {
    if (const auto mean = history.mean_loss(id)) observed.push_back({*mean, id});
  }
  if (observed.size() < 2) throw TooFewObservations(observed.size());

  std::vector<double> losses;
  for (const auto& [loss, id] : observed) losses.push_back(loss);
  std::sort(losses.begin(), losses.end());
  const auto m = losses.size();
  auto idx = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(m)));
  idx = std::min(idx, m - 1);

  HistorySplit split;
  split.threshold = losses[idx];
  for (const auto& [loss, id] : observed)
    (loss < split.threshold ? split.good : split.bad).push_back(id);
  return split;
}

namespace detail {

inline double truncated_normal_pdf(double x, double mu, double sigma, double lo, double hi) {
  const double z = normal_cdf((hi - mu) / sigma) - normal_cdf((lo - mu) / sigma);
  if (z <= 0.0) return 0.0;
  return normal_pdf((x - mu) / sigma) / sigma / z;
}

}  // namespace detail

// 1-D kernel estimator over a bounded (prior-transformed) interval: one
// Gaussian per observation, bandwidth the larger of the gaps to its
// neighbours with the domain endpoints as sentinels, truncated-renormalized
// to the domain, mixed uniformly with a single uniform prior component.
struct ContinuousEstimator {
  double lo = 0.0, hi = 1.0;       // transformed bounds
  std::vector<double> points;      // sorted observations, transformed
  std::vector<double> bandwidths;  // same length as points

  static ContinuousEstimator fit(std::vector<double> observations, double lo, double hi) {
    ContinuousEstimator est;
    est.lo = lo;
    est.hi = hi;
    std::sort(observations.begin(), observations.end());
    est.points = std::move(observations);
    const double floor = parzen_bandwidth_floor_fraction * (hi - lo);
    est.bandwidths.resize(est.points.size());
    for (std::size_t i = 0; i < est.points.size(); ++i) {
      const double left = i == 0 ? lo : est.points[i - 1];
      const double right = i + 1 == est.points.size() ? hi : est.points[i + 1];
      est.bandwidths[i] =
          std::max({est.points[i] - left, right - est.points[i], floor});
    }
    return est;
  }

  double density_at(double x) const {
    const double uniform = 1.0 / (hi - lo);
    if (points.empty()) return uniform;
    double sum = uniform;  // the prior pseudo-kernel
    for (std::size_t i = 0; i < points.size(); ++i)
      sum += detail::truncated_normal_pdf(x, points[i], bandwidths[i], lo, hi);
    return sum / static_cast<double>(points.size() + 1);
  }

  double sample(Rng& rng) const {
    const auto component = rng.index(points.size() + 1);
    if (component == points.size()) return rng.uniform(lo, hi);
    const double mu = points[component];
    const double sigma = bandwidths[component];
    for (int tries = 0; tries < 100; ++tries) {
      const double x = mu + sigma * rng.normal();
      if (x >= lo && x <= hi) return x;
    }
    return std::clamp(mu, lo, hi);
  }
};

// Category counts with +1 smoothing.
struct DiscreteEstimator {
  std::vector<double> probs;

  static DiscreteEstimator fit(const std::vector<std::size_t>& counts) {
    DiscreteEstimator est;
    double total = 0.0;
    est.probs.resize(counts.size());
    for (std::size_t l = 0; l < counts.size(); ++l) {
      est.probs[l] = static_cast<double>(counts[l]) + 1.0;
      total += est.probs[l];
    }
    for (double& p : est.probs) p /= total;
    return est;
  }

  double prob(std::size_t level) const { return probs[level]; }

  std::size_t sample(Rng& rng) const {
    double u = rng.uniform01();
    for (std::size_t l = 0; l < probs.size(); ++l) {
      u -= probs[l];
      if (u < 0.0) return l;
    }
    return probs.size() - 1;
  }
};

// Per-parameter 1-D estimators arranged by the space's condition structure.
// Only configs in which a parameter is active contribute observations to
// that parameter's estimator.
struct DensityTree {
  struct Node {
    bool discrete = false;
    ContinuousEstimator continuous;
    DiscreteEstimator categorical;
    std::size_t observations = 0;
  };
  std::vector<Node> nodes;  // aligned with space.params()
};

inline DensityTree build_parzen(std::span<const Config* const> configs, const ParamSpace& space) {
  DensityTree tree;
  tree.nodes.resize(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& p = space.params()[i];
    auto& node = tree.nodes[i];
    if (p.kind == DomainKind::categorical) {
      node.discrete = true;
      std::vector<std::size_t> counts(p.levels.size(), 0);
      for (const Config* cfg : configs) {
        const auto it = cfg->values.find(p.name);
        if (it == cfg->values.end()) continue;
        ++counts[static_cast<std::size_t>(p.level_index(std::get<std::string>(it->second)))];
        ++node.observations;
      }
      node.categorical = DiscreteEstimator::fit(counts);
    } else {
      const auto [lo, hi] = detail::numeric_bounds(p);
      std::vector<double> observations;
      for (const Config* cfg : configs) {
        const auto it = cfg->values.find(p.name);
        if (it == cfg->values.end()) continue;
        observations.push_back(detail::encode_value(p, it->second));
      }
      node.observations = observations.size();
      node.continuous = ContinuousEstimator::fit(std::move(observations), lo, hi);
    }
  }
  return tree;
}

inline DensityTree build_parzen(const RunHistory& history, std::span<const int> ids,
                                const ParamSpace& space) {
  std::vector<const Config*> configs;
  configs.reserve(ids.size());
  for (int id : ids) configs.push_back(&history.config(id));
  return build_parzen(configs, space);
}

// Probability (density) of a config: the product of the 1-D estimates of
// its active parameters; inactive parameters are never touched.
inline double density(const DensityTree& tree, const ParamSpace& space, const Config& cfg) {
  double product = 1.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& p = space.params()[i];
    const auto it = cfg.values.find(p.name);
    if (it == cfg.values.end()) continue;
    const auto& node = tree.nodes[i];
    if (node.discrete) {
      product *=
          node.categorical.prob(static_cast<std::size_t>(p.level_index(std::get<std::string>(it->second))));
    } else {
      product *= node.continuous.density_at(detail::encode_value(p, it->second));
    }
  }
  return product;
}

namespace detail {

inline ParamValue sample_from_node(const ParamSpec& p, const DensityTree::Node& node, Rng& rng) {
  if (node.discrete) return p.levels[node.categorical.sample(rng)];
  const double x = node.continuous.sample(rng);
  if (p.kind == DomainKind::integer) {
    const double raw = p.prior == Prior::log_uniform ? std::exp(x) : x;
    return std::clamp(static_cast<std::int64_t>(std::llround(raw)), p.ilo, p.ihi);
  }
  const double raw = p.prior == Prior::log_uniform ? std::exp(x) : x;
  return std::clamp(raw, p.lo, p.hi);
}

}  // namespace detail

// Ancestral sampling from the good-side estimators.
inline Config sample_from_tree(const DensityTree& tree, const ParamSpace& space, Rng& rng) {
  Config cfg;
  for (std::size_t i : space.topo_order()) {
    const auto& p = space.params()[i];
    bool active = true;
    for (const auto& cond : p.conditions) {
      if (!detail::condition_holds(space.params()[space.index_of(cond.parent)], cond, cfg)) {
        active = false;
        break;
      }
    }
    if (active) cfg.values.emplace(p.name, detail::sample_from_node(p, tree.nodes[i], rng));
  }
  return cfg;
}

// Draws candidates from l and returns the one minimizing g/l (first wins
// ties). Densities are compared in log space.
inline Config propose_tpe(const DensityTree& l_tree, const DensityTree& g_tree,
                          const ParamSpace& space, int n_candidates, Rng& rng) {
  Config best;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (int c = 0; c < n_candidates; ++c) {
    Config cand = sample_from_tree(l_tree, space, rng);
    const double l = density(l_tree, space, cand);
    const double g = density(g_tree, space, cand);
    const double ratio = std::log(g) - std::log(l);
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best = std::move(cand);
    }
  }
  return best;
}

inline Config propose_tpe(const HistorySplit& split, const RunHistory& history,
                          const ParamSpace& space, double gamma, int n_candidates, Rng& rng) {
  (void)gamma;  // selection is the bare g/l argmin; gamma only scales the EI report
  const DensityTree l_tree = build_parzen(history, split.good, space);
  const DensityTree g_tree = build_parzen(history, split.bad, space);
  return propose_tpe(l_tree, g_tree, space, n_candidates, rng);
}

// Closed-form quantity proportional to the expected improvement:
// (gamma + (g/l) * (1 - gamma))^-1. Its argmax coincides with the g/l
// argmin.
inline double ei_score(double gamma, double l_density, double g_density) {
  if (l_density <= 0.0) throw NonpositiveDensity();
  return 1.0 / (gamma + g_density / l_density * (1.0 - gamma));
}

// TPE optimizer: full cross-validation per proposal, density split at the
// gamma-quantile, candidates scored by the density ratio.
class TpeStrategy : public OptimizerStrategy {
 public:
  explicit TpeStrategy(double gamma = tpe_default_gamma,
                       int n_candidates = tpe_default_candidates)
      : gamma_(gamma), candidates_(n_candidates) {}

  void initialize(const ParamSpace& space, std::uint64_t seed) override {
    space_ = &space;
    rng_ = std::make_unique<Rng>(mix_seed(seed, 0x79e));
    best_id_ = -1;
    best_loss_ = std::numeric_limits<double>::infinity();
  }

  Config propose(const RunHistory& history) override {
    int observed = 0;
    for (int id = 0; id < history.config_count(); ++id)
      if (history.mean_loss(id)) ++observed;
    if (observed < 2) return sample_random(*space_, *rng_);
    const HistorySplit split = split_history(history, gamma_);
    return propose_tpe(split, history, *space_, gamma_, candidates_, *rng_);
  }

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

 private:
  double gamma_;
  int candidates_;
  const ParamSpace* space_ = nullptr;
  std::unique_ptr<Rng> rng_;
  int best_id_ = -1;
  double best_loss_ = std::numeric_limits<double>::infinity();
  int k_hint_ = -1;
};

}  // namespace cash
