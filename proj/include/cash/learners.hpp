#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
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
#include "cash/param_space.hpp"
#include "cash/random.hpp"

namespace cash {

// ---------------------------------------------------------------------------
// Training budget

inline constexpr long long no_budget_limit = std::numeric_limits<long long>::max();

// Counts instance evaluations consumed by training; optionally enforces a
// wall-clock deadline with the same exhaustion semantics.
class BudgetMeter {
 public:
  explicit BudgetMeter(long long cap = no_budget_limit,
                       std::optional<double> wall_seconds = {})
      : remaining_(cap) {
    if (wall_seconds)
      deadline_ = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(*wall_seconds));
  }

  void charge(long long units) {
    if (deadline_ && std::chrono::steady_clock::now() > *deadline_) throw BudgetExhausted();
    if (units > remaining_) throw BudgetExhausted();
    remaining_ -= units;
    used_ += units;
  }

  long long used() const { return used_; }

 private:
  long long remaining_;
  long long used_ = 0;
  std::optional<std::chrono::steady_clock::time_point> deadline_;
};

// ---------------------------------------------------------------------------
// Model interface

class ModelImpl {
 public:
  virtual ~ModelImpl() = default;
  virtual int predict_one(std::span<const double> row) const = 0;
  virtual void hash_state(Hasher& h) const = 0;
};

using ModelPtr = std::shared_ptr<const ModelImpl>;

namespace detail {

inline int argmax_lowest(std::span<const double> scores) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(scores.size()); ++c)
    if (scores[c] > scores[best]) best = c;
  return best;
}

inline std::vector<double> normalized_weights(std::span<const double> weights, std::size_t n) {
  std::vector<double> w(n, 0.0);
  if (weights.empty()) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
    return w;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += weights[i];
  if (sum <= 0.0) sum = 1.0;
  for (std::size_t i = 0; i < n; ++i) w[i] = weights[i] / sum;
  return w;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Feature selection

enum class FeatSearch { ranker, greedy_forward };
enum class FeatEval { info_gain, pearson_correlation };

struct FeatSelConfig {
  FeatSearch search = FeatSearch::ranker;
  FeatEval evaluator = FeatEval::info_gain;
  double ranker_keep_fraction = 0.5;  // (0,1], ranker only
};

inline constexpr int info_gain_bins = 10;

namespace detail {

inline double entropy(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double c : counts) {
    if (c <= 0.0) continue;
    const double p = c / total;
    h -= p * std::log(p);
  }
  return h;
}

// Bin index of attribute j of instance i, used by both feature evaluation
// and the histogram learners. Numeric attributes get equal-width bins over
// the observed range; categorical attributes use their levels directly.
struct AttrBinner {
  int bins = 0;
  bool categorical = false;
  double lo = 0.0, width = 1.0;

  static AttrBinner fit(const Dataset& data, std::size_t j, int numeric_bins) {
    AttrBinner b;
    if (data.attr(j).kind == AttrKind::categorical) {
      b.categorical = true;
      b.bins = static_cast<int>(data.attr(j).level_count());
      return b;
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < data.size(); ++i) {
      lo = std::min(lo, data.row(i)[j]);
      hi = std::max(hi, data.row(i)[j]);
    }
    b.bins = numeric_bins;
    b.lo = lo;
    b.width = (hi > lo) ? (hi - lo) / numeric_bins : 1.0;
    return b;
  }

  int bin(double v) const {
    if (categorical) return static_cast<int>(v);
    const int idx = static_cast<int>((v - lo) / width);
    return std::clamp(idx, 0, bins - 1);
  }
};

}  // namespace detail

// H(Y) - H(Y | X_binned), natural log, equal-width binning for numerics.
inline double info_gain(const Dataset& data, std::size_t attr) {
  const std::size_t n = data.size();
  const int classes = data.class_count();
  const auto binner = detail::AttrBinner::fit(data, attr, info_gain_bins);

  std::vector<double> class_counts(classes, 0.0);
  std::vector<std::vector<double>> joint(binner.bins, std::vector<double>(classes, 0.0));
  std::vector<double> bin_counts(binner.bins, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int b = binner.bin(data.row(i)[attr]);
    const int y = data.label(i);
    class_counts[y] += 1.0;
    joint[b][y] += 1.0;
    bin_counts[b] += 1.0;
  }
  const double hy = detail::entropy(class_counts, static_cast<double>(n));
  double hy_given_x = 0.0;
  for (int b = 0; b < binner.bins; ++b) {
    if (bin_counts[b] <= 0.0) continue;
    hy_given_x += bin_counts[b] / static_cast<double>(n) * detail::entropy(joint[b], bin_counts[b]);
  }
  return hy - hy_given_x;
}

// Class-frequency-weighted mean of |corr(X, 1[Y=c])| over classes.
// Categorical attributes enter as their level index.
inline double pearson_score(const Dataset& data, std::size_t attr) {
  const std::size_t n = data.size();
  double mean_x = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_x += data.row(i)[attr];
  mean_x /= static_cast<double>(n);
  double var_x = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = data.row(i)[attr] - mean_x;
    var_x += d * d;
  }
  if (var_x <= 0.0) return 0.0;

  const auto hist = data.class_histogram();
  double score = 0.0;
  for (int c = 0; c < data.class_count(); ++c) {
    const double nc = hist[static_cast<std::size_t>(c)];
    if (nc <= 0.0 || nc >= static_cast<double>(n)) continue;
    const double mean_y = nc / static_cast<double>(n);
    double cov = 0.0, var_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ind = data.label(i) == c ? 1.0 : 0.0;
      cov += (data.row(i)[attr] - mean_x) * (ind - mean_y);
      var_y += (ind - mean_y) * (ind - mean_y);
    }
    if (var_y <= 0.0) continue;
    score += nc / static_cast<double>(n) * std::abs(cov / std::sqrt(var_x * var_y));
  }
  return score;
}

inline std::vector<double> attribute_scores(FeatEval evaluator, const Dataset& data) {
  std::vector<double> scores(data.attr_count());
  for (std::size_t j = 0; j < data.attr_count(); ++j)
    scores[j] = evaluator == FeatEval::info_gain ? info_gain(data, j) : pearson_score(data, j);
  return scores;
}

// Attribute subset transform fitted by select_features.
struct FittedSelector {
  std::vector<std::size_t> kept;  // ascending attribute indices

  std::vector<double> apply(std::span<const double> row) const {
    std::vector<double> out;
    out.reserve(kept.size());
    for (std::size_t j : kept) out.push_back(row[j]);
    return out;
  }

  Dataset apply(const Dataset& data) const {
    std::vector<AttrMeta> attrs;
    for (std::size_t j : kept) attrs.push_back(data.attr(j));
    std::vector<std::vector<double>> rows(data.size());
    std::vector<int> labels(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      rows[i] = apply(data.row(i));
      labels[i] = data.label(i);
    }
    return Dataset(data.name(), std::move(attrs), data.class_names(), std::move(rows),
                   std::move(labels), data.label_name());
  }
};

// Ranker keeps the ceil(fraction * d) best-scoring attributes. Greedy
// forward selection adds attributes in score order while the mean score of
// the growing set strictly improves. Both always keep at least one.
inline FittedSelector select_features(const FeatSelConfig& cfg, const Dataset& data,
                                      std::uint64_t seed) {
  (void)seed;  // both shipped evaluators are deterministic
  if (data.attr_count() == 0) throw DataError("feature selection needs at least one attribute");
  const auto scores = attribute_scores(cfg.evaluator, data);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  FittedSelector sel;
  if (cfg.search == FeatSearch::ranker) {
    const auto keep = static_cast<std::size_t>(
        std::ceil(cfg.ranker_keep_fraction * static_cast<double>(scores.size())));
    sel.kept.assign(order.begin(),
                    order.begin() + std::clamp<std::size_t>(keep, 1, scores.size()));
  } else {
    double sum = 0.0;
    for (std::size_t j : order) {
      if (!sel.kept.empty() && scores[j] <= sum / static_cast<double>(sel.kept.size())) break;
      sel.kept.push_back(j);
      sum += scores[j];
    }
  }
  std::sort(sel.kept.begin(), sel.kept.end());
  return sel;
}

// ---------------------------------------------------------------------------
// Base learners

namespace detail {

struct ZeroRModel : ModelImpl {
  int majority = 0;
  int predict_one(std::span<const double>) const override { return majority; }
  void hash_state(Hasher& h) const override { h.add(majority); }
};

inline ModelPtr train_zero_r(const Dataset& data, std::span<const double> weights) {
  std::vector<double> totals(data.class_count(), 0.0);
  const auto w = normalized_weights(weights, data.size());
  for (std::size_t i = 0; i < data.size(); ++i) totals[data.label(i)] += w[i];
  auto m = std::make_shared<ZeroRModel>();
  m->majority = argmax_lowest(totals);
  return m;
}

struct OneRModel : ModelImpl {
  std::size_t attr = 0;
  AttrBinner binner;
  std::vector<int> bin_class;
  int fallback = 0;
  int predict_one(std::span<const double> row) const override {
    const int b = binner.bin(row[attr]);
    return bin_class[static_cast<std::size_t>(b)];
  }
  void hash_state(Hasher& h) const override {
    h.add(static_cast<std::int64_t>(attr));
    h.add(binner.lo);
    h.add(binner.width);
    for (int c : bin_class) h.add(c);
    h.add(fallback);
  }
};

inline ModelPtr train_one_r(const Dataset& data, std::span<const double> weights, int bins,
                            BudgetMeter& meter) {
  const auto w = normalized_weights(weights, data.size());
  std::vector<double> totals(data.class_count(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) totals[data.label(i)] += w[i];
  const int global_majority = argmax_lowest(totals);

  auto best = std::make_shared<OneRModel>();
  double best_error = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < data.attr_count(); ++j) {
    meter.charge(static_cast<long long>(data.size()));
    const auto binner = AttrBinner::fit(data, j, bins);
    std::vector<std::vector<double>> counts(binner.bins,
                                            std::vector<double>(data.class_count(), 0.0));
    for (std::size_t i = 0; i < data.size(); ++i)
      counts[binner.bin(data.row(i)[j])][data.label(i)] += w[i];
    std::vector<int> rule(binner.bins, global_majority);
    double error = 0.0;
    for (int b = 0; b < binner.bins; ++b) {
      double total = 0.0;
      for (double c : counts[b]) total += c;
      if (total > 0.0) rule[b] = argmax_lowest(counts[b]);
      error += total - counts[b][rule[b]];
    }
    if (error < best_error) {
      best_error = error;
      best->attr = j;
      best->binner = binner;
      best->bin_class = std::move(rule);
      best->fallback = global_majority;
    }
  }
  return best;
}

struct StumpModel : ModelImpl {
  int attr = -1;  // -1: constant model
  bool categorical = false;
  double threshold = 0.0;  // numeric: row[attr] <= threshold goes left
  int level = 0;           // categorical: row[attr] == level goes left
  int left_class = 0, right_class = 0;
  int predict_one(std::span<const double> row) const override {
    if (attr < 0) return left_class;
    const bool go_left = categorical ? static_cast<int>(row[attr]) == level
                                     : row[attr] <= threshold;
    return go_left ? left_class : right_class;
  }
  void hash_state(Hasher& h) const override {
    h.add(attr);
    h.add(categorical);
    h.add(threshold);
    h.add(level);
    h.add(left_class);
    h.add(right_class);
  }
};

// Single split minimizing weighted misclassification.
inline ModelPtr train_stump(const Dataset& data, std::span<const double> weights,
                            BudgetMeter& meter) {
  const auto w = normalized_weights(weights, data.size());
  const int classes = data.class_count();
  std::vector<double> totals(classes, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) totals[data.label(i)] += w[i];
  double total_weight = 0.0;
  for (double t : totals) total_weight += t;

  auto model = std::make_shared<StumpModel>();
  model->left_class = argmax_lowest(totals);
  double best_error = total_weight - totals[model->left_class];

  for (std::size_t j = 0; j < data.attr_count(); ++j) {
    meter.charge(static_cast<long long>(data.size()));
    if (data.attr(j).kind == AttrKind::categorical) {
      const auto L = data.attr(j).level_count();
      std::vector<std::vector<double>> per_level(L, std::vector<double>(classes, 0.0));
      for (std::size_t i = 0; i < data.size(); ++i)
        per_level[static_cast<std::size_t>(data.row(i)[j])][data.label(i)] += w[i];
      for (std::size_t l = 0; l < L; ++l) {
        std::vector<double> rest(classes, 0.0);
        for (int c = 0; c < classes; ++c) rest[c] = totals[c] - per_level[l][c];
        const int lc = argmax_lowest(per_level[l]);
        const int rc = argmax_lowest(rest);
        const double err = (std::accumulate(per_level[l].begin(), per_level[l].end(), 0.0) -
                            per_level[l][lc]) +
                           (std::accumulate(rest.begin(), rest.end(), 0.0) - rest[rc]);
        if (err < best_error) {
          best_error = err;
          model->attr = static_cast<int>(j);
          model->categorical = true;
          model->level = static_cast<int>(l);
          model->left_class = lc;
          model->right_class = rc;
        }
      }
    } else {
      std::vector<std::size_t> order(data.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.row(a)[j] < data.row(b)[j];
      });
      std::vector<double> left(classes, 0.0);
      for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
        const std::size_t i = order[pos];
        left[data.label(i)] += w[i];
        const double v = data.row(i)[j];
        const double next = data.row(order[pos + 1])[j];
        if (next <= v) continue;
        std::vector<double> right(classes, 0.0);
        for (int c = 0; c < classes; ++c) right[c] = totals[c] - left[c];
        const int lc = argmax_lowest(left);
        const int rc = argmax_lowest(right);
        const double err = (std::accumulate(left.begin(), left.end(), 0.0) - left[lc]) +
                           (std::accumulate(right.begin(), right.end(), 0.0) - right[rc]);
        if (err < best_error) {
          best_error = err;
          model->attr = static_cast<int>(j);
          model->categorical = false;
          model->threshold = v + (next - v) / 2.0;
          model->left_class = lc;
          model->right_class = rc;
        }
      }
    }
  }
  return model;
}

struct KnnModel : ModelImpl {
  int k = 1;
  bool inverse_weighting = false;
  int classes = 0;
  std::vector<bool> numeric;
  std::vector<double> scale_lo, scale_width;
  std::vector<std::vector<double>> points;  // normalized
  std::vector<int> labels;
  std::vector<double> instance_weights;

  std::vector<double> normalize(std::span<const double> row) const {
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
      out[j] = numeric[j] ? (row[j] - scale_lo[j]) / scale_width[j] : row[j];
    return out;
  }

  int predict_one(std::span<const double> raw) const override {
    const auto q = normalize(raw);
    std::vector<std::pair<double, std::size_t>> dist(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) {
        if (numeric[j]) {
          const double d = q[j] - points[i][j];
          d2 += d * d;
        } else {
          d2 += q[j] == points[i][j] ? 0.0 : 1.0;
        }
      }
      dist[i] = {d2, i};
    }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), points.size());
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    std::vector<double> votes(classes, 0.0);
    for (std::size_t r = 0; r < kk; ++r) {
      const auto [d2, i] = dist[r];
      const double vote = inverse_weighting ? 1.0 / (std::sqrt(d2) + 1e-9) : 1.0;
      votes[labels[i]] += vote * instance_weights[i];
    }
    return argmax_lowest(votes);
  }

  void hash_state(Hasher& h) const override {
    h.add(k);
    h.add(inverse_weighting);
    for (const auto& p : points)
      for (double v : p) h.add(v);
    for (int y : labels) h.add(y);
    for (double v : instance_weights) h.add(v);
  }
};

inline ModelPtr train_knn(const Dataset& data, std::span<const double> weights, int k,
                          bool inverse) {
  auto m = std::make_shared<KnnModel>();
  m->k = std::max(1, k);
  m->inverse_weighting = inverse;
  m->classes = data.class_count();
  m->numeric.resize(data.attr_count());
  m->scale_lo.assign(data.attr_count(), 0.0);
  m->scale_width.assign(data.attr_count(), 1.0);
  for (std::size_t j = 0; j < data.attr_count(); ++j) {
    m->numeric[j] = data.attr(j).kind == AttrKind::numeric;
    if (!m->numeric[j]) continue;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < data.size(); ++i) {
      lo = std::min(lo, data.row(i)[j]);
      hi = std::max(hi, data.row(i)[j]);
    }
    m->scale_lo[j] = lo;
    m->scale_width[j] = hi > lo ? hi - lo : 1.0;
  }
  m->points.resize(data.size());
  m->labels.resize(data.size());
  m->instance_weights = normalized_weights(weights, data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    m->points[i] = m->normalize(data.row(i));
    m->labels[i] = data.label(i);
  }
  return m;
}

struct NaiveBayesModel : ModelImpl {
  bool histogram_numeric = false;
  int classes = 0;
  std::vector<double> log_prior;
  // gaussian stats [attr][class], histogram log probs [attr][class][bin]
  std::vector<bool> use_gaussian;
  std::vector<std::vector<double>> mean, var;
  std::vector<AttrBinner> binners;
  std::vector<std::vector<std::vector<double>>> log_bin_prob;

  int predict_one(std::span<const double> row) const override {
    std::vector<double> logp = log_prior;
    for (std::size_t j = 0; j < row.size(); ++j) {
      for (int c = 0; c < classes; ++c) {
        if (use_gaussian[j]) {
          const double d = row[j] - mean[j][c];
          logp[c] += -0.5 * std::log(2.0 * 3.14159265358979323846 * var[j][c]) -
                     d * d / (2.0 * var[j][c]);
        } else {
          logp[c] += log_bin_prob[j][c][static_cast<std::size_t>(binners[j].bin(row[j]))];
        }
      }
    }
    return argmax_lowest(logp);
  }

  void hash_state(Hasher& h) const override {
    h.add(histogram_numeric);
    for (double v : log_prior) h.add(v);
    for (const auto& a : mean)
      for (double v : a) h.add(v);
    for (const auto& a : var)
      for (double v : a) h.add(v);
    for (const auto& a : log_bin_prob)
      for (const auto& b : a)
        for (double v : b) h.add(v);
  }
};

inline constexpr double nb_variance_floor = 1e-9;
inline constexpr int nb_histogram_bins = 10;

inline ModelPtr train_naive_bayes(const Dataset& data, std::span<const double> weights,
                                  bool histogram_numeric) {
  const auto w = normalized_weights(weights, data.size());
  const std::size_t n = data.size();
  const int classes = data.class_count();
  auto m = std::make_shared<NaiveBayesModel>();
  m->histogram_numeric = histogram_numeric;
  m->classes = classes;

  std::vector<double> class_w(classes, 0.0);
  for (std::size_t i = 0; i < n; ++i) class_w[data.label(i)] += w[i];
  // Laplace smoothing on the prior, with weights rescaled to effective count n.
  m->log_prior.resize(classes);
  for (int c = 0; c < classes; ++c)
    m->log_prior[c] =
        std::log((class_w[c] * n + 1.0) / (static_cast<double>(n) + classes));

  m->use_gaussian.resize(data.attr_count());
  m->mean.resize(data.attr_count());
  m->var.resize(data.attr_count());
  m->binners.resize(data.attr_count());
  m->log_bin_prob.resize(data.attr_count());
  for (std::size_t j = 0; j < data.attr_count(); ++j) {
    const bool gaussian =
        data.attr(j).kind == AttrKind::numeric && !histogram_numeric;
    m->use_gaussian[j] = gaussian;
    if (gaussian) {
      // global stats back-fill classes absent from this training subset
      double gm = 0.0, gv = 0.0;
      for (std::size_t i = 0; i < n; ++i) gm += w[i] * data.row(i)[j];
      for (std::size_t i = 0; i < n; ++i) {
        const double d = data.row(i)[j] - gm;
        gv += w[i] * d * d;
      }
      gv = std::max(gv, nb_variance_floor);
      m->mean[j].assign(classes, gm);
      m->var[j].assign(classes, gv);
      for (int c = 0; c < classes; ++c) {
        if (class_w[c] <= 0.0) continue;
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          if (data.label(i) == c) mu += w[i] * data.row(i)[j];
        mu /= class_w[c];
        double s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (data.label(i) != c) continue;
          const double d = data.row(i)[j] - mu;
          s2 += w[i] * d * d;
        }
        m->mean[j][c] = mu;
        m->var[j][c] = std::max(s2 / class_w[c], nb_variance_floor);
      }
    } else {
      const auto binner = AttrBinner::fit(data, j, nb_histogram_bins);
      m->binners[j] = binner;
      m->log_bin_prob[j].assign(classes, std::vector<double>(binner.bins, 0.0));
      for (int c = 0; c < classes; ++c) {
        std::vector<double> counts(binner.bins, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          if (data.label(i) == c) counts[binner.bin(data.row(i)[j])] += w[i] * n;
        const double total = class_w[c] * n;
        for (int b = 0; b < binner.bins; ++b)
          m->log_bin_prob[j][c][b] = std::log((counts[b] + 1.0) / (total + binner.bins));
      }
    }
  }
  return m;
}

struct LogisticModel : ModelImpl {
  int classes = 0;
  std::vector<bool> numeric;
  std::vector<double> center, spread;       // numeric standardization
  std::vector<std::size_t> one_hot_offset;  // start column per attribute
  std::size_t dim = 0;
  std::vector<std::vector<double>> w;  // [class][dim + 1], last is bias

  std::vector<double> encode(std::span<const double> row) const {
    std::vector<double> x(dim, 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (numeric[j]) {
        x[one_hot_offset[j]] = (row[j] - center[j]) / spread[j];
      } else {
        const auto idx = one_hot_offset[j] + static_cast<std::size_t>(row[j]);
        if (idx < dim) x[idx] = 1.0;
      }
    }
    return x;
  }

  std::vector<double> logits(std::span<const double> x) const {
    std::vector<double> z(classes, 0.0);
    for (int c = 0; c < classes; ++c) {
      double s = w[c][dim];
      for (std::size_t d = 0; d < dim; ++d) s += w[c][d] * x[d];
      z[c] = s;
    }
    return z;
  }

  int predict_one(std::span<const double> row) const override {
    const auto x = encode(row);
    const auto z = logits(x);
    return argmax_lowest(z);
  }

  void hash_state(Hasher& h) const override {
    for (const auto& wc : w)
      for (double v : wc) h.add(v);
  }
};

inline ModelPtr train_logistic_sgd(const Dataset& data, std::span<const double> weights,
                                   double learning_rate, int epochs, double l2, Rng& rng,
                                   BudgetMeter& meter) {
  const std::size_t n = data.size();
  const auto iw = normalized_weights(weights, n);
  auto m = std::make_shared<LogisticModel>();
  m->classes = data.class_count();
  m->numeric.resize(data.attr_count());
  m->center.assign(data.attr_count(), 0.0);
  m->spread.assign(data.attr_count(), 1.0);
  m->one_hot_offset.resize(data.attr_count());
  std::size_t dim = 0;
  for (std::size_t j = 0; j < data.attr_count(); ++j) {
    m->numeric[j] = data.attr(j).kind == AttrKind::numeric;
    m->one_hot_offset[j] = dim;
    if (m->numeric[j]) {
      double mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) mu += data.row(i)[j];
      mu /= static_cast<double>(n);
      double s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = data.row(i)[j] - mu;
        s2 += d * d;
      }
      s2 /= static_cast<double>(n);
      m->center[j] = mu;
      m->spread[j] = s2 > 0.0 ? std::sqrt(s2) : 1.0;
      dim += 1;
    } else {
      dim += data.attr(j).level_count();
    }
  }
  m->dim = dim;
  m->w.assign(m->classes, std::vector<double>(dim + 1, 0.0));

  std::vector<std::vector<double>> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = m->encode(data.row(i));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int e = 0; e < epochs; ++e) {
    meter.charge(static_cast<long long>(n));
    rng.shuffle(order);
    for (std::size_t i : order) {
      auto z = m->logits(xs[i]);
      const double zmax = *std::max_element(z.begin(), z.end());
      double denom = 0.0;
      for (double& v : z) {
        v = std::exp(v - zmax);
        denom += v;
      }
      const double scale = learning_rate * iw[i] * static_cast<double>(n);
      for (int c = 0; c < m->classes; ++c) {
        const double p = z[c] / denom;
        const double g = p - (data.label(i) == c ? 1.0 : 0.0);
        auto& wc = m->w[c];
        for (std::size_t d = 0; d < dim; ++d)
          wc[d] -= scale * (g * xs[i][d] + l2 * wc[d]);
        wc[dim] -= scale * g;
      }
    }
  }
  return m;
}

// --- CART-style trees (shared by cart_tree and random_forest) ---

struct TreeNode {
  int attr = -1;  // -1: leaf
  bool categorical = false;
  double threshold = 0.0;
  int level = 0;
  int left = -1, right = -1;
  int leaf_class = 0;
};

struct TreeParams {
  int max_depth = 10;
  int min_leaf = 1;
  double feature_fraction = 1.0;  // per-split sampling when < 1
};

struct TreeModel : ModelImpl {
  std::vector<TreeNode> nodes;

  int predict_from(std::span<const double> row, int node) const {
    while (nodes[node].attr >= 0) {
      const auto& nd = nodes[node];
      const bool go_left = nd.categorical
                               ? static_cast<int>(row[nd.attr]) == nd.level
                               : row[nd.attr] <= nd.threshold;
      node = go_left ? nd.left : nd.right;
    }
    return nodes[node].leaf_class;
  }
  int predict_one(std::span<const double> row) const override { return predict_from(row, 0); }
  void hash_state(Hasher& h) const override {
    for (const auto& nd : nodes) {
      h.add(nd.attr);
      h.add(nd.categorical);
      h.add(nd.threshold);
      h.add(nd.level);
      h.add(nd.leaf_class);
    }
  }
};

inline double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / total) * (c / total);
  return 1.0 - s;
}

struct SplitChoice {
  bool found = false;
  int attr = -1;
  bool categorical = false;
  double threshold = 0.0;
  int level = 0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, std::span<const double> weights, const TreeParams& params,
              Rng& rng, BudgetMeter& meter)
      : data_(data), params_(params), rng_(rng), meter_(meter) {
    w_ = normalized_weights(weights, data.size());
  }

  TreeModel build(std::vector<std::size_t> members) {
    TreeModel model;
    grow(model, std::move(members), 0);
    return model;
  }

 private:
  int grow(TreeModel& model, std::vector<std::size_t> members, int depth) {
    meter_.charge(static_cast<long long>(members.size()));
    std::vector<double> counts(data_.class_count(), 0.0);
    for (std::size_t i : members) counts[data_.label(i)] += w_[i];
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);

    const int node = static_cast<int>(model.nodes.size());
    model.nodes.emplace_back();
    model.nodes[node].leaf_class = argmax_lowest(counts);

    const bool pure = gini(counts, total) <= 0.0;
    if (pure || depth >= params_.max_depth ||
        members.size() < 2 * static_cast<std::size_t>(params_.min_leaf))
      return node;

    const auto split = best_split(members, counts, total);
    if (!split.found) return node;

    std::vector<std::size_t> left, right;
    for (std::size_t i : members) {
      const double v = data_.row(i)[split.attr];
      const bool go_left =
          split.categorical ? static_cast<int>(v) == split.level : v <= split.threshold;
      (go_left ? left : right).push_back(i);
    }
    members.clear();
    members.shrink_to_fit();
    model.nodes[node].attr = split.attr;
    model.nodes[node].categorical = split.categorical;
    model.nodes[node].threshold = split.threshold;
    model.nodes[node].level = split.level;
    const int l = grow(model, std::move(left), depth + 1);
    model.nodes[node].left = l;
    const int r = grow(model, std::move(right), depth + 1);
    model.nodes[node].right = r;
    return node;
  }

  std::vector<std::size_t> candidate_attrs() {
    const std::size_t d = data_.attr_count();
    std::vector<std::size_t> attrs(d);
    std::iota(attrs.begin(), attrs.end(), std::size_t{0});
    if (params_.feature_fraction >= 1.0) return attrs;
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(params_.feature_fraction * d)));
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + rng_.index(d - i);
      std::swap(attrs[i], attrs[j]);
    }
    attrs.resize(take);
    std::sort(attrs.begin(), attrs.end());
    return attrs;
  }

  SplitChoice best_split(const std::vector<std::size_t>& members,
                         const std::vector<double>& counts, double total) {
    SplitChoice best;
    const double parent_impurity = gini(counts, total);
    const int classes = data_.class_count();
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);

    for (std::size_t j : candidate_attrs()) {
      if (data_.attr(j).kind == AttrKind::categorical) {
        const auto L = data_.attr(j).level_count();
        std::vector<std::vector<double>> lw(L, std::vector<double>(classes, 0.0));
        std::vector<std::size_t> ln(L, 0);
        for (std::size_t i : members) {
          const auto l = static_cast<std::size_t>(data_.row(i)[j]);
          lw[l][data_.label(i)] += w_[i];
          ++ln[l];
        }
        for (std::size_t l = 0; l < L; ++l) {
          if (ln[l] < min_leaf || members.size() - ln[l] < min_leaf) continue;
          std::vector<double> rest(classes, 0.0);
          double lt = 0.0;
          for (int c = 0; c < classes; ++c) {
            rest[c] = counts[c] - lw[l][c];
            lt += lw[l][c];
          }
          const double gain = parent_impurity - (lt / total) * gini(lw[l], lt) -
                              ((total - lt) / total) * gini(rest, total - lt);
          if (gain > best.gain + 1e-15) {
            best = {true, static_cast<int>(j), true, 0.0, static_cast<int>(l), gain};
          }
        }
      } else {
        std::vector<std::size_t> order = members;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return data_.row(a)[j] < data_.row(b)[j];
        });
        std::vector<double> left(classes, 0.0);
        double lt = 0.0;
        for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
          const std::size_t i = order[pos];
          left[data_.label(i)] += w_[i];
          lt += w_[i];
          const double v = data_.row(i)[j];
          const double next = data_.row(order[pos + 1])[j];
          if (next <= v) continue;
          if (pos + 1 < min_leaf || order.size() - pos - 1 < min_leaf) continue;
          std::vector<double> right(classes, 0.0);
          for (int c = 0; c < classes; ++c) right[c] = counts[c] - left[c];
          const double gain = parent_impurity - (lt / total) * gini(left, lt) -
                              ((total - lt) / total) * gini(right, total - lt);
          if (gain > best.gain + 1e-15) {
            best = {true, static_cast<int>(j), false, v + (next - v) / 2.0, 0, gain};
          }
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  TreeParams params_;
  Rng& rng_;
  BudgetMeter& meter_;
  std::vector<double> w_;
};

inline ModelPtr train_cart(const Dataset& data, std::span<const double> weights, int max_depth,
                           int min_leaf, Rng& rng, BudgetMeter& meter) {
  TreeParams p;
  p.max_depth = max_depth;
  p.min_leaf = min_leaf;
  TreeBuilder builder(data, weights, p, rng, meter);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return std::make_shared<TreeModel>(builder.build(std::move(all)));
}

struct VotedModel : ModelImpl {
  std::vector<ModelPtr> members;
  std::vector<double> member_weights;  // empty: unweighted
  int classes = 0;
  int predict_one(std::span<const double> row) const override {
    std::vector<double> votes(classes, 0.0);
    for (std::size_t t = 0; t < members.size(); ++t) {
      const double a = member_weights.empty() ? 1.0 : member_weights[t];
      votes[members[t]->predict_one(row)] += a;
    }
    return argmax_lowest(votes);
  }
  void hash_state(Hasher& h) const override {
    h.add(static_cast<std::int64_t>(members.size()));
    for (std::size_t t = 0; t < members.size(); ++t) {
      if (!member_weights.empty()) h.add(member_weights[t]);
      members[t]->hash_state(h);
    }
  }
};

inline constexpr int forest_max_depth = 25;

inline ModelPtr train_random_forest(const Dataset& data, std::span<const double> weights,
                                    int trees, double feature_fraction, Rng& rng,
                                    BudgetMeter& meter) {
  auto m = std::make_shared<VotedModel>();
  m->classes = data.class_count();
  TreeParams p;
  p.max_depth = forest_max_depth;
  p.min_leaf = 1;
  p.feature_fraction = feature_fraction;
  for (int t = 0; t < trees; ++t) {
    std::vector<std::size_t> bag(data.size());
    for (auto& i : bag) i = rng.index(data.size());
    TreeBuilder builder(data, weights, p, rng, meter);
    m->members.push_back(std::make_shared<TreeModel>(builder.build(std::move(bag))));
  }
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Roster and hyperparameter access

inline const std::vector<std::string>& base_learner_ids() {
  static const std::vector<std::string> ids = {"zero_r",      "one_r",       "decision_stump",
                                               "knn",         "naive_bayes", "logistic_sgd",
                                               "cart_tree",   "random_forest"};
  return ids;
}

inline const std::vector<std::string>& meta_learner_ids() {
  static const std::vector<std::string> ids = {"adaboost_m1", "bagging", "voting"};
  return ids;
}

// Scoped accessor for one selector slot's hyperparameters, e.g. prefix
// "meta_base." resolves "knn.k" to "meta_base.knn.k". Missing entries fall
// back to the provided defaults so hand-built partial configs stay usable.
class HpView {
 public:
  HpView(const Config& cfg, std::string prefix) : cfg_(cfg), prefix_(std::move(prefix)) {}

  std::int64_t integer(const std::string& rel, std::int64_t fallback) const {
    const auto it = cfg_.values.find(prefix_ + rel);
    if (it == cfg_.values.end()) return fallback;
    return std::get<std::int64_t>(it->second);
  }
  double real(const std::string& rel, double fallback) const {
    const auto it = cfg_.values.find(prefix_ + rel);
    if (it == cfg_.values.end()) return fallback;
    return std::get<double>(it->second);
  }
  std::string str(const std::string& rel, const std::string& fallback) const {
    const auto it = cfg_.values.find(prefix_ + rel);
    if (it == cfg_.values.end()) return fallback;
    return std::get<std::string>(it->second);
  }

 private:
  const Config& cfg_;
  std::string prefix_;
};

namespace detail {

inline ModelPtr train_base_learner(const std::string& id, const HpView& hp, const Dataset& data,
                                   std::span<const double> weights, std::uint64_t seed,
                                   BudgetMeter& meter) {
  if (data.size() == 0) throw DataError("cannot train on an empty dataset");
  meter.charge(static_cast<long long>(data.size()));
  if (data.distinct_class_count() <= 1) return train_zero_r(data, weights);

  Rng rng(seed);
  if (id == "zero_r") return train_zero_r(data, weights);
  if (id == "one_r")
    return train_one_r(data, weights, static_cast<int>(hp.integer("one_r.bins", 10)), meter);
  if (id == "decision_stump") return train_stump(data, weights, meter);
  if (id == "knn")
    return train_knn(data, weights, static_cast<int>(hp.integer("knn.k", 5)),
                     hp.str("knn.weight", "uniform") == "inverse");
  if (id == "naive_bayes")
    return train_naive_bayes(data, weights,
                             hp.str("naive_bayes.model", "gaussian") == "histogram");
  if (id == "logistic_sgd")
    return train_logistic_sgd(data, weights, hp.real("logistic_sgd.learning_rate", 0.01),
                              static_cast<int>(hp.integer("logistic_sgd.epochs", 20)),
                              hp.real("logistic_sgd.l2", 1e-4), rng, meter);
  if (id == "cart_tree")
    return train_cart(data, weights, static_cast<int>(hp.integer("cart_tree.max_depth", 10)),
                      static_cast<int>(hp.integer("cart_tree.min_leaf", 2)), rng, meter);
  if (id == "random_forest")
    return train_random_forest(data, weights,
                               static_cast<int>(hp.integer("random_forest.trees", 32)),
                               hp.real("random_forest.feature_fraction", 0.5), rng, meter);
  throw ConfigError("unknown base learner: " + id);
}

inline std::uint64_t subconfig_seed(const Config& cfg, const std::string& slot,
                                    std::uint64_t seed) {
  Hasher h;
  h.add(cfg.str(slot));
  const std::string prefix = slot + ".";
  for (const auto& [name, value] : cfg.values) {
    if (name.rfind(prefix, 0) != 0) continue;
    h.add(name);
    h.add(value_repr(value));
  }
  return mix_seed(seed, h.value());
}

struct AdaBoostModel : VotedModel {
  std::vector<double> round_weight_sums;  // post-normalization, diagnostics
};

inline constexpr double adaboost_max_alpha = 35.0;

inline ModelPtr train_adaboost(const std::string& base_id, const HpView& hp, int iterations,
                               const Dataset& data, std::uint64_t seed, BudgetMeter& meter) {
  const std::size_t n = data.size();
  auto model = std::make_shared<AdaBoostModel>();
  model->classes = data.class_count();
  std::vector<double> w(n, 1.0 / static_cast<double>(n));

  for (int t = 0; t < iterations; ++t) {
    auto base = train_base_learner(base_id, hp, data, w, mix_seed(seed, 0xada + t), meter);
    meter.charge(static_cast<long long>(n));  // the reweighting pass evaluates every instance
    std::vector<bool> wrong(n, false);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      wrong[i] = base->predict_one(data.row(i)) != data.label(i);
      if (wrong[i]) err += w[i];
    }
    if (err >= 0.5) {
      if (model->members.empty()) {
        model->members.push_back(std::move(base));
        model->member_weights.push_back(1.0);
      }
      break;
    }
    if (err <= 0.0) {
      model->members.push_back(std::move(base));
      model->member_weights.push_back(adaboost_max_alpha);
      model->round_weight_sums.push_back(std::accumulate(w.begin(), w.end(), 0.0));
      break;
    }
    const double beta = err / (1.0 - err);
    model->members.push_back(std::move(base));
    model->member_weights.push_back(std::log(1.0 / beta));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!wrong[i]) w[i] *= beta;
      sum += w[i];
    }
    for (double& v : w) v /= sum;
    model->round_weight_sums.push_back(std::accumulate(w.begin(), w.end(), 0.0));
  }
  if (model->members.empty())
    return train_zero_r(data, {});
  return model;
}

inline ModelPtr train_bagging(const std::string& base_id, const HpView& hp, int iterations,
                              double fraction, const Dataset& data, std::uint64_t seed,
                              BudgetMeter& meter) {
  // Degenerate documented case: a single full-fraction bag is the base
  // learner trained on the data as-is (no resampling).
  if (iterations == 1 && fraction >= 1.0)
    return train_base_learner(base_id, hp, data, {}, mix_seed(seed, 0xba6), meter);

  const std::size_t n = data.size();
  const auto bag_size =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * n)));
  auto model = std::make_shared<VotedModel>();
  model->classes = data.class_count();
  Rng rng(mix_seed(seed, 0xba66ed));
  for (int t = 0; t < iterations; ++t) {
    std::vector<std::size_t> idx(bag_size);
    for (auto& i : idx) i = rng.index(n);
    const Dataset bag = data.subset(idx);
    model->members.push_back(
        train_base_learner(base_id, hp, bag, {}, mix_seed(seed, 0xba6 + t), meter));
  }
  return model;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// The reduced learner space

namespace detail {

inline void append_learner_params(std::vector<ParamSpec>& out, const std::string& slot) {
  auto only = [&](const char* learner) {
    return std::vector<Condition>{{slot, {learner}}};
  };
  const std::string p = slot + ".";
  out.push_back(integer_param(p + "one_r.bins", 2, 32, 10, Prior::uniform, only("one_r")));
  out.push_back(integer_param(p + "knn.k", 1, 51, 5, Prior::log_uniform, only("knn")));
  out.push_back(categorical_param(p + "knn.weight", {"uniform", "inverse"}, "uniform",
                                  only("knn")));
  out.push_back(categorical_param(p + "naive_bayes.model", {"gaussian", "histogram"},
                                  "gaussian", only("naive_bayes")));
  out.push_back(real_param(p + "logistic_sgd.learning_rate", 1e-4, 1.0, 0.01,
                           Prior::log_uniform, only("logistic_sgd")));
  out.push_back(
      integer_param(p + "logistic_sgd.epochs", 5, 100, 20, Prior::uniform, only("logistic_sgd")));
  out.push_back(real_param(p + "logistic_sgd.l2", 1e-6, 0.1, 1e-4, Prior::log_uniform,
                           only("logistic_sgd")));
  out.push_back(
      integer_param(p + "cart_tree.max_depth", 1, 20, 10, Prior::uniform, only("cart_tree")));
  out.push_back(
      integer_param(p + "cart_tree.min_leaf", 1, 20, 2, Prior::uniform, only("cart_tree")));
  out.push_back(integer_param(p + "random_forest.trees", 2, 128, 32, Prior::log_uniform,
                              only("random_forest")));
  out.push_back(real_param(p + "random_forest.feature_fraction", 0.1, 1.0, 0.5, Prior::uniform,
                           only("random_forest")));
}

}  // namespace detail

// Builds the full reduced search space: the two top-level booleans, the
// base/meta/ensemble selectors with their conditional hyperparameters, and
// the feature-selection branch.
inline ParamSpace space_of_learners() {
  std::vector<ParamSpec> specs;
  specs.push_back(categorical_param("is_base", {"true", "false"}, "true"));
  specs.push_back(categorical_param("feat_sel", {"true", "false"}, "false"));

  specs.push_back(
      categorical_param("base", base_learner_ids(), "cart_tree", {{"is_base", {"true"}}}));
  specs.push_back(categorical_param("class", meta_learner_ids(), "adaboost_m1",
                                    {{"is_base", {"false"}}}));
  specs.push_back(categorical_param("meta_base", base_learner_ids(), "cart_tree",
                                    {{"class", {"adaboost_m1", "bagging"}}}));
  specs.push_back(categorical_param("num_bases", {"1", "2", "3", "4", "5"}, "1",
                                    {{"class", {"voting"}}}));
  // base_1 is live whenever voting is; base_i (i >= 2) joins as num_bases grows
  specs.push_back(
      categorical_param("base_1", base_learner_ids(), "cart_tree", {{"class", {"voting"}}}));
  for (int i = 2; i <= 5; ++i) {
    std::vector<std::string> activating;
    for (int v = i; v <= 5; ++v) activating.push_back(std::to_string(v));
    specs.push_back(categorical_param("base_" + std::to_string(i), base_learner_ids(),
                                      "cart_tree", {{"num_bases", activating}}));
  }

  specs.push_back(integer_param("adaboost.iterations", 2, 64, 10, Prior::uniform,
                                {{"class", {"adaboost_m1"}}}));
  specs.push_back(
      integer_param("bagging.iterations", 1, 64, 10, Prior::uniform, {{"class", {"bagging"}}}));
  specs.push_back(
      real_param("bagging.fraction", 0.1, 1.0, 1.0, Prior::uniform, {{"class", {"bagging"}}}));

  specs.push_back(categorical_param("feat_search", {"ranker", "greedy_forward"}, "ranker",
                                    {{"feat_sel", {"true"}}}));
  specs.push_back(categorical_param("feat_eval", {"info_gain", "pearson_correlation"},
                                    "info_gain", {{"feat_sel", {"true"}}}));
  specs.push_back(real_param("ranker.keep_fraction", 0.05, 1.0, 0.5, Prior::uniform,
                             {{"feat_search", {"ranker"}}}));

  detail::append_learner_params(specs, "base");
  detail::append_learner_params(specs, "meta_base");
  for (int i = 1; i <= 5; ++i)
    detail::append_learner_params(specs, "base_" + std::to_string(i));

  return ParamSpace::validate(std::move(specs), "is_base");
}

// ---------------------------------------------------------------------------
// Trained model wrapper and the training entry point

class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(ModelPtr impl, std::optional<FittedSelector> selector, std::size_t arity,
               int classes)
      : impl_(std::move(impl)),
        selector_(std::move(selector)),
        arity_(arity),
        classes_(classes) {}

  int predict_one(std::span<const double> row) const {
    if (row.size() != arity_) throw ArityMismatch(row.size(), arity_);
    if (selector_) {
      const auto reduced = selector_->apply(row);
      return impl_->predict_one(reduced);
    }
    return impl_->predict_one(row);
  }

  std::vector<int> predict(const std::vector<std::vector<double>>& rows) const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(predict_one(r));
    return out;
  }

  std::vector<int> predict(const Dataset& data) const {
    std::vector<int> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.push_back(predict_one(data.row(i)));
    return out;
  }

  std::uint64_t state_hash() const {
    Hasher h;
    impl_->hash_state(h);
    if (selector_)
      for (std::size_t j : selector_->kept) h.add(static_cast<std::int64_t>(j));
    return h.value();
  }

  int class_count() const { return classes_; }
  std::size_t arity() const { return arity_; }
  const std::optional<FittedSelector>& selector() const { return selector_; }
  const ModelPtr& impl() const { return impl_; }

 private:
  ModelPtr impl_;
  std::optional<FittedSelector> selector_;
  std::size_t arity_ = 0;
  int classes_ = 0;
};

inline FeatSelConfig feat_sel_from_config(const Config& cfg) {
  FeatSelConfig fc;
  const HpView hp(cfg, "");
  fc.search = hp.str("feat_search", "ranker") == "greedy_forward" ? FeatSearch::greedy_forward
                                                                  : FeatSearch::ranker;
  fc.evaluator = hp.str("feat_eval", "info_gain") == "pearson_correlation"
                     ? FeatEval::pearson_correlation
                     : FeatEval::info_gain;
  fc.ranker_keep_fraction = hp.real("ranker.keep_fraction", 0.5);
  return fc;
}

// Trains the learner described by a full-space config. Throws
// BudgetExhausted when `budget` instance evaluations (or the optional
// wall-clock cap) are consumed; callers map that to a loss of 1.0.
inline TrainedModel train(const Config& cfg, const Dataset& data,
                          long long budget = no_budget_limit, std::uint64_t seed = 0,
                          std::optional<double> wall_seconds = {}) {
  if (data.size() == 0) throw DataError("cannot train on an empty dataset");
  BudgetMeter meter(budget, wall_seconds);
  const HpView top(cfg, "");

  std::optional<FittedSelector> selector;
  const Dataset* working = &data;
  Dataset reduced;
  if (top.str("feat_sel", "false") == "true") {
    meter.charge(static_cast<long long>(data.size() * std::max<std::size_t>(1, data.attr_count())));
    selector = select_features(feat_sel_from_config(cfg), data, seed);
    reduced = selector->apply(data);
    working = &reduced;
  }

  ModelPtr impl;
  if (top.str("is_base", "true") == "true") {
    const std::string id = top.str("base", "cart_tree");
    impl = detail::train_base_learner(id, HpView(cfg, "base."), *working, {},
                                      mix_seed(seed, 0xb45e), meter);
  } else {
    const std::string cls = top.str("class", "adaboost_m1");
    if (cls == "adaboost_m1") {
      impl = detail::train_adaboost(top.str("meta_base", "cart_tree"), HpView(cfg, "meta_base."),
                                    static_cast<int>(top.integer("adaboost.iterations", 10)),
                                    *working, seed, meter);
    } else if (cls == "bagging") {
      impl = detail::train_bagging(top.str("meta_base", "cart_tree"), HpView(cfg, "meta_base."),
                                   static_cast<int>(top.integer("bagging.iterations", 10)),
                                   top.real("bagging.fraction", 1.0), *working, seed, meter);
    } else if (cls == "voting") {
      auto voted = std::make_shared<detail::VotedModel>();
      voted->classes = working->class_count();
      const int nb = std::stoi(top.str("num_bases", "1"));
      for (int i = 1; i <= nb; ++i) {
        const std::string slot = "base_" + std::to_string(i);
        voted->members.push_back(detail::train_base_learner(
            top.str(slot, "cart_tree"), HpView(cfg, slot + "."), *working, {},
            detail::subconfig_seed(cfg, slot, seed), meter));
      }
      impl = voted;
    } else {
      throw ConfigError("unknown meta learner: " + cls);
    }
  }
  return TrainedModel(std::move(impl), std::move(selector), data.attr_count(),
                      data.class_count());
}

inline double misclassification_rate(const TrainedModel& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (model.predict_one(data.row(i)) != data.label(i)) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

}  // namespace cash
