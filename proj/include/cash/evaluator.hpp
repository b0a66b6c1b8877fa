#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cash/dataset.hpp"
#include "cash/errors.hpp"
#include "cash/learners.hpp"
#include "cash/param_space.hpp"

namespace cash {

struct FoldLossRecord {
  int config_id = -1;
  int fold = -1;
  double loss = 0.0;
  bool budget_exhausted = false;
  double wall_time_s = 0.0;
};

struct TrajectoryPoint {
  long long evaluations = 0;
  int config_id = -1;
  double cv_loss = 0.0;
};

// Append-only record of every fold evaluation: the config registry, the
// per-fold losses, and the incumbent trajectory. Duplicate (config, fold)
// evaluations are rejected; callers consult the cache first.
class RunHistory {
 public:
  int register_config(const Config& cfg) {
    const std::string key = config_key(cfg);
    const auto it = ids_.find(key);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(configs_.size());
    configs_.push_back(cfg);
    ids_.emplace(key, id);
    return id;
  }

  int config_count() const { return static_cast<int>(configs_.size()); }
  const Config& config(int id) const { return configs_[static_cast<std::size_t>(id)]; }

  const FoldLossRecord* record(int id, int fold) const {
    const auto it = by_key_.find(key_of(id, fold));
    return it == by_key_.end() ? nullptr : &records_[it->second];
  }

  void append(FoldLossRecord rec) {
    if (rec.config_id < 0 || rec.config_id >= config_count())
      throw ConfigError("record references an unregistered config");
    if (record(rec.config_id, rec.fold)) throw ConfigError("duplicate fold record");
    by_key_.emplace(key_of(rec.config_id, rec.fold), records_.size());
    records_.push_back(rec);
  }

  const std::vector<FoldLossRecord>& records() const { return records_; }

  // Folds evaluated for a config, in evaluation order.
  std::vector<int> folds_of(int id) const {
    std::vector<int> out;
    for (const auto& r : records_)
      if (r.config_id == id) out.push_back(r.fold);
    return out;
  }

  // Mean loss over the folds evaluated so far; empty when none.
  std::optional<double> mean_loss(int id) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : records_) {
      if (r.config_id != id) continue;
      sum += r.loss;
      ++count;
    }
    if (count == 0) return std::nullopt;
    return sum / count;
  }

  // Records an incumbent-change event. Entries are kept strictly
  // decreasing in loss ("best known" semantics); a racing replacement whose
  // mean does not beat the last recorded value leaves the trajectory as is.
  void record_incumbent(long long evaluations, int config_id, double cv_loss) {
    if (!trajectory_.empty()) {
      if (trajectory_.back().config_id == config_id) return;
      if (cv_loss >= trajectory_.back().cv_loss) return;
    }
    trajectory_.push_back({evaluations, config_id, cv_loss});
  }

  const std::vector<TrajectoryPoint>& trajectory() const { return trajectory_; }

  // Deserialization support.
  void restore_trajectory(std::vector<TrajectoryPoint> t) { trajectory_ = std::move(t); }

 private:
  static std::uint64_t key_of(int id, int fold) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(id)) << 32) |
           static_cast<std::uint32_t>(fold);
  }

  std::vector<Config> configs_;
  std::unordered_map<std::string, int> ids_;
  std::vector<FoldLossRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> by_key_;
  std::vector<TrajectoryPoint> trajectory_;
};

// Trains `cfg` on all folds but `fold` and scores it on `fold`. Budget or
// wall-clock exhaustion maps to a loss of 1.0 with the flag set; nothing is
// thrown. Deterministic in (config, data, plan, fold, budget, seed).
inline FoldLossRecord evaluate_fold(const Config& cfg, const Dataset& data, const FoldPlan& plan,
                                    int fold, long long budget, std::uint64_t seed,
                                    std::optional<double> wall_seconds = {}) {
  if (fold < 0 || fold >= plan.k) throw ConfigError("fold index out of range");
  FoldLossRecord rec;
  rec.fold = fold;
  const auto start = std::chrono::steady_clock::now();
  const Dataset train_part = data.subset(plan.train_members(fold));
  const Dataset valid_part = data.subset(plan.fold_members(fold));
  try {
    const TrainedModel model =
        train(cfg, train_part, budget, mix_seed(seed, static_cast<std::uint64_t>(fold)),
              wall_seconds);
    rec.loss = misclassification_rate(model, valid_part);
  } catch (const BudgetExhausted&) {
    rec.loss = 1.0;
    rec.budget_exhausted = true;
  }
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

// Arithmetic mean of the per-fold losses of `config_id` over `folds`.
inline double mean_cv_loss(const RunHistory& history, int config_id, std::span<const int> folds) {
  if (folds.empty()) throw ConfigError("mean over an empty fold set");
  double sum = 0.0;
  for (int f : folds) {
    const auto* r = history.record(config_id, f);
    if (!r) throw MissingFold(f);
    sum += r->loss;
  }
  return sum / static_cast<double>(folds.size());
}

}  // namespace cash
