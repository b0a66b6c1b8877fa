#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "cash/dataset.hpp"  // detail::format_double
#include "cash/errors.hpp"
#include "cash/random.hpp"

namespace cash {

using ParamValue = std::variant<std::int64_t, double, std::string>;

enum class DomainKind { categorical, integer, real };
enum class Prior { uniform, log_uniform };

// One activation condition: the parameter is active only while `parent`
// (a categorical parameter) takes a value in `values`.
struct Condition {
  std::string parent;
  std::vector<std::string> values;
};

struct ParamSpec {
  std::string name;
  DomainKind kind = DomainKind::categorical;
  std::vector<std::string> levels;       // categorical
  double lo = 0.0, hi = 0.0;             // real bounds
  std::int64_t ilo = 0, ihi = 0;         // integer bounds (inclusive)
  Prior prior = Prior::uniform;
  ParamValue default_value;
  std::vector<Condition> conditions;     // conjunction; empty = unconditional

  bool conditional() const { return !conditions.empty(); }

  bool contains(const ParamValue& v) const {
    switch (kind) {
      case DomainKind::categorical: {
        const auto* s = std::get_if<std::string>(&v);
        return s && std::find(levels.begin(), levels.end(), *s) != levels.end();
      }
      case DomainKind::integer: {
        const auto* i = std::get_if<std::int64_t>(&v);
        return i && *i >= ilo && *i <= ihi;
      }
      case DomainKind::real: {
        const auto* d = std::get_if<double>(&v);
        return d && *d >= lo && *d <= hi;
      }
    }
    return false;
  }

  int level_index(const std::string& s) const {
    const auto it = std::find(levels.begin(), levels.end(), s);
    return it == levels.end() ? -1 : static_cast<int>(it - levels.begin());
  }
};

inline ParamSpec categorical_param(std::string name, std::vector<std::string> levels,
                                   std::string def, std::vector<Condition> conds = {}) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = DomainKind::categorical;
  p.levels = std::move(levels);
  p.default_value = std::move(def);
  p.conditions = std::move(conds);
  return p;
}

inline ParamSpec integer_param(std::string name, std::int64_t lo, std::int64_t hi,
                               std::int64_t def, Prior prior = Prior::uniform,
                               std::vector<Condition> conds = {}) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = DomainKind::integer;
  p.ilo = lo;
  p.ihi = hi;
  p.prior = prior;
  p.default_value = def;
  p.conditions = std::move(conds);
  return p;
}

inline ParamSpec real_param(std::string name, double lo, double hi, double def,
                            Prior prior = Prior::uniform, std::vector<Condition> conds = {}) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = DomainKind::real;
  p.lo = lo;
  p.hi = hi;
  p.prior = prior;
  p.default_value = def;
  p.conditions = std::move(conds);
  return p;
}

// A (possibly partial) assignment of values to parameters. A valid complete
// Config assigns exactly the active parameters.
struct Config {
  std::map<std::string, ParamValue> values;

  bool operator==(const Config&) const = default;
  bool has(const std::string& name) const { return values.count(name) > 0; }
  const ParamValue& at(const std::string& name) const { return values.at(name); }

  const std::string& str(const std::string& name) const {
    return std::get<std::string>(values.at(name));
  }
  std::int64_t integer(const std::string& name) const {
    return std::get<std::int64_t>(values.at(name));
  }
  double real(const std::string& name) const { return std::get<double>(values.at(name)); }
};

inline std::string value_repr(const ParamValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return "i" + std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) return "r" + detail::format_double(*d);
  return "c" + std::get<std::string>(v);
}

// Canonical string identity of a config (names are sorted by the map).
inline std::string config_key(const Config& cfg) {
  std::string key;
  for (const auto& [name, value] : cfg.values) {
    key += name;
    key += '\x1f';
    key += value_repr(value);
    key += '\x1e';
  }
  return key;
}

// Validated hierarchical space. Construct through ParamSpace::validate.
class ParamSpace {
 public:
  // Checks every space invariant and returns the validated space.
  static ParamSpace validate(std::vector<ParamSpec> specs, std::string root);

  const std::vector<ParamSpec>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }
  const std::string& root() const { return root_; }
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  const ParamSpec& param(const std::string& name) const { return params_[index_of(name)]; }
  std::size_t index_of(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }
  // Indices ordered so every condition parent precedes its children.
  const std::vector<std::size_t>& topo_order() const { return topo_; }
  // Declared-order indices of conditional parameters (activity-flag slots).
  const std::vector<std::size_t>& conditional_params() const { return conditionals_; }
  std::size_t feature_length() const { return params_.size() + conditionals_.size(); }

 private:
  ParamSpace() = default;
  std::vector<ParamSpec> params_;
  std::string root_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> topo_;
  std::vector<std::size_t> conditionals_;
};

inline ParamSpace ParamSpace::validate(std::vector<ParamSpec> specs, std::string root) {
  ParamSpace space;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& p = specs[i];
    if (space.index_.count(p.name)) throw ConfigError("duplicate parameter name: " + p.name);
    space.index_.emplace(p.name, i);
  }
  const auto root_it = space.index_.find(root);
  if (root_it == space.index_.end()) throw ConfigError("root parameter not found: " + root);
  {
    const auto& r = specs[root_it->second];
    if (r.kind != DomainKind::categorical)
      throw ConfigError("root parameter must be categorical: " + root);
    if (r.conditional()) throw ConfigError("root parameter must be unconditional: " + root);
  }

  for (const auto& p : specs) {
    switch (p.kind) {
      case DomainKind::categorical: {
        if (p.levels.empty()) throw InvalidDomain(p.name + ": empty level set");
        std::set<std::string> uniq(p.levels.begin(), p.levels.end());
        if (uniq.size() != p.levels.size())
          throw InvalidDomain(p.name + ": duplicate levels");
        break;
      }
      case DomainKind::integer:
        if (p.ilo > p.ihi) throw InvalidDomain(p.name + ": empty integer range");
        if (p.prior == Prior::log_uniform && p.ilo <= 0)
          throw InvalidDomain(p.name + ": log-uniform prior requires a positive lower bound");
        break;
      case DomainKind::real:
        if (!(p.lo < p.hi)) throw InvalidDomain(p.name + ": empty real range");
        if (p.prior == Prior::log_uniform && p.lo <= 0)
          throw InvalidDomain(p.name + ": log-uniform prior requires a positive lower bound");
        break;
    }
    if (!p.contains(p.default_value)) throw DefaultOutOfDomain(p.name);

    for (const auto& cond : p.conditions) {
      const auto it = space.index_.find(cond.parent);
      if (it == space.index_.end()) throw UnknownParent(cond.parent);
      const auto& parent = specs[it->second];
      if (parent.kind != DomainKind::categorical) throw NonCategoricalParent(cond.parent);
      if (cond.values.empty())
        throw ConfigError(p.name + ": empty activating set on parent " + cond.parent);
      std::set<std::string> uniq(cond.values.begin(), cond.values.end());
      for (const auto& v : uniq) {
        if (parent.level_index(v) < 0)
          throw ConfigError(p.name + ": activating value '" + v +
                            "' is not a level of parent " + cond.parent);
      }
      if (uniq.size() >= parent.levels.size())
        throw ConfigError(p.name + ": activating set must be a strict subset of parent " +
                          cond.parent + "'s domain");
    }
  }

  // Cycle check + topological order over the condition graph.
  const std::size_t n = specs.size();
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on stack, 2 done
  std::vector<std::size_t> topo;
  std::vector<std::string> stack;
  auto dfs = [&](auto&& self, std::size_t i) -> void {
    state[i] = 1;
    stack.push_back(specs[i].name);
    for (const auto& cond : specs[i].conditions) {
      const std::size_t pi = space.index_.at(cond.parent);
      if (state[pi] == 1) {
        std::string path;
        const auto begin =
            std::find(stack.begin(), stack.end(), specs[pi].name);
        for (auto it = begin; it != stack.end(); ++it) path += *it + " -> ";
        path += specs[pi].name;
        throw CycleDetected(path);
      }
      if (state[pi] == 0) self(self, pi);
    }
    state[i] = 2;
    stack.pop_back();
    topo.push_back(i);
  };
  for (std::size_t i = 0; i < n; ++i)
    if (state[i] == 0) dfs(dfs, i);

  for (std::size_t i = 0; i < n; ++i)
    if (specs[i].conditional()) space.conditionals_.push_back(i);

  space.params_ = std::move(specs);
  space.root_ = std::move(root);
  space.topo_ = std::move(topo);
  return space;
}

namespace detail {

inline bool condition_holds(const ParamSpec& parent_spec, const Condition& cond,
                            const Config& cfg) {
  const auto it = cfg.values.find(cond.parent);
  if (it == cfg.values.end()) return false;
  const auto* s = std::get_if<std::string>(&it->second);
  if (!s) return false;
  (void)parent_spec;
  return std::find(cond.values.begin(), cond.values.end(), *s) != cond.values.end();
}

}  // namespace detail

// Fixed point of condition propagation: a parameter is active iff all of its
// conditions are satisfied by values of parameters that are themselves
// active. Unassigned parents simply deactivate their descendants.
inline std::set<std::string> active_params(const ParamSpace& space, const Config& partial) {
  std::vector<bool> active(space.size(), false);
  for (std::size_t i : space.topo_order()) {
    const auto& p = space.params()[i];
    bool ok = true;
    for (const auto& cond : p.conditions) {
      const std::size_t pi = space.index_of(cond.parent);
      if (!active[pi] || !detail::condition_holds(space.params()[pi], cond, partial)) {
        ok = false;
        break;
      }
    }
    active[i] = ok;
  }
  std::set<std::string> out;
  for (std::size_t i = 0; i < space.size(); ++i)
    if (active[i]) out.insert(space.params()[i].name);
  return out;
}

namespace detail {

inline ParamValue sample_value(const ParamSpec& p, Rng& rng) {
  switch (p.kind) {
    case DomainKind::categorical:
      return p.levels[rng.index(p.levels.size())];
    case DomainKind::integer: {
      if (p.prior == Prior::log_uniform) {
        const double u = rng.uniform(std::log(static_cast<double>(p.ilo)),
                                     std::log(static_cast<double>(p.ihi) + 1.0));
        auto v = static_cast<std::int64_t>(std::floor(std::exp(u)));
        return std::clamp(v, p.ilo, p.ihi);
      }
      return rng.uniform_int(p.ilo, p.ihi);
    }
    case DomainKind::real: {
      if (p.prior == Prior::log_uniform)
        return std::exp(rng.uniform(std::log(p.lo), std::log(p.hi)));
      return rng.uniform(p.lo, p.hi);
    }
  }
  return ParamValue{};
}

}  // namespace detail

// Ancestral sampling from the priors: unconditional parameters first, then
// activated descendants top-down.
inline Config sample_random(const ParamSpace& space, Rng& rng) {
  Config cfg;
  for (std::size_t i : space.topo_order()) {
    const auto& p = space.params()[i];
    bool ok = true;
    for (const auto& cond : p.conditions) {
      if (!detail::condition_holds(space.params()[space.index_of(cond.parent)], cond, cfg)) {
        ok = false;
        break;
      }
    }
    if (ok) cfg.values.emplace(p.name, detail::sample_value(p, rng));
  }
  return cfg;
}

// Throws ConfigError unless `cfg` assigns exactly the active parameters with
// in-domain values of the right type.
inline void check_config(const ParamSpace& space, const Config& cfg) {
  const auto active = active_params(space, cfg);
  for (const auto& name : active) {
    const auto it = cfg.values.find(name);
    if (it == cfg.values.end()) throw ConfigError("active parameter missing: " + name);
    if (!space.param(name).contains(it->second))
      throw ConfigError("value out of domain for parameter: " + name);
  }
  for (const auto& [name, value] : cfg.values) {
    (void)value;
    if (!space.has(name)) throw ConfigError("unknown parameter assigned: " + name);
    if (!active.count(name)) throw ConfigError("inactive parameter assigned: " + name);
  }
}

namespace detail {

inline double transform_numeric(const ParamSpec& p, double raw) {
  return p.prior == Prior::log_uniform ? std::log(raw) : raw;
}

inline double encode_value(const ParamSpec& p, const ParamValue& v) {
  switch (p.kind) {
    case DomainKind::categorical:
      return static_cast<double>(p.level_index(std::get<std::string>(v)));
    case DomainKind::integer:
      return transform_numeric(p, static_cast<double>(std::get<std::int64_t>(v)));
    case DomainKind::real:
      return transform_numeric(p, std::get<double>(v));
  }
  return 0.0;
}

// Transformed-coordinate bounds of a numeric parameter.
inline std::pair<double, double> numeric_bounds(const ParamSpec& p) {
  double lo = p.kind == DomainKind::integer ? static_cast<double>(p.ilo) : p.lo;
  double hi = p.kind == DomainKind::integer ? static_cast<double>(p.ihi) : p.hi;
  return {transform_numeric(p, lo), transform_numeric(p, hi)};
}

}  // namespace detail

// Fixed-length numeric encoding: one slot per parameter (inactive slots hold
// the encoded default) followed by one activity flag per conditional
// parameter. Log-prior values are stored in ln-space.
inline std::vector<double> impute_defaults(const ParamSpace& space, const Config& cfg) {
  std::vector<double> v;
  v.reserve(space.feature_length());
  for (const auto& p : space.params()) {
    const auto it = cfg.values.find(p.name);
    v.push_back(detail::encode_value(p, it != cfg.values.end() ? it->second : p.default_value));
  }
  for (std::size_t i : space.conditional_params())
    v.push_back(cfg.values.count(space.params()[i].name) ? 1.0 : 0.0);
  return v;
}

inline constexpr int numeric_neighbor_count = 4;
inline constexpr double neighbor_scale = 0.2;

namespace detail {

// Rebuilds a valid config after `changed` was reassigned: still-active
// parameters keep their values, newly active ones are sampled from priors,
// newly inactive ones are dropped.
inline Config repair_config(const ParamSpace& space, const Config& base,
                            const std::string& changed, const ParamValue& new_value, Rng& rng) {
  Config cfg;
  for (std::size_t i : space.topo_order()) {
    const auto& p = space.params()[i];
    bool ok = true;
    for (const auto& cond : p.conditions) {
      if (!condition_holds(space.params()[space.index_of(cond.parent)], cond, cfg)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (p.name == changed) {
      cfg.values.emplace(p.name, new_value);
    } else if (const auto it = base.values.find(p.name); it != base.values.end()) {
      cfg.values.emplace(p.name, it->second);
    } else {
      cfg.values.emplace(p.name, sample_value(p, rng));
    }
  }
  return cfg;
}

}  // namespace detail

// Local moves around `cfg`: every alternative level of each active
// categorical parameter, and `numeric_neighbor_count` Gaussian draws per
// active numeric parameter (scale 0.2 of the prior-transformed range,
// clipped to the domain). Category changes re-sample newly active
// descendants and drop newly inactive ones.
inline std::vector<Config> neighbors(const ParamSpace& space, const Config& cfg, Rng& rng) {
  std::vector<Config> out;
  for (const auto& p : space.params()) {
    const auto it = cfg.values.find(p.name);
    if (it == cfg.values.end()) continue;
    if (p.kind == DomainKind::categorical) {
      const std::string& cur = std::get<std::string>(it->second);
      for (const auto& level : p.levels) {
        if (level == cur) continue;
        out.push_back(detail::repair_config(space, cfg, p.name, level, rng));
      }
    } else {
      const auto [tlo, thi] = detail::numeric_bounds(p);
      const double cur = detail::encode_value(p, it->second);
      const double scale = neighbor_scale * (thi - tlo);
      for (int t = 0; t < numeric_neighbor_count; ++t) {
        double x = std::clamp(cur + rng.normal() * scale, tlo, thi);
        Config nb = cfg;
        if (p.kind == DomainKind::integer) {
          const double raw = p.prior == Prior::log_uniform ? std::exp(x) : x;
          nb.values[p.name] =
              std::clamp(static_cast<std::int64_t>(std::llround(raw)), p.ilo, p.ihi);
        } else {
          nb.values[p.name] = p.prior == Prior::log_uniform ? std::exp(x) : x;
        }
        // exp/log round-tripping can nudge past the bound
        if (p.kind == DomainKind::real)
          nb.values[p.name] = std::clamp(std::get<double>(nb.values[p.name]), p.lo, p.hi);
        out.push_back(std::move(nb));
      }
    }
  }
  return out;
}

// Completes a partial assignment with defaults along the active chain.
inline Config complete_with_defaults(const ParamSpace& space, const Config& partial) {
  Config cfg;
  for (std::size_t i : space.topo_order()) {
    const auto& p = space.params()[i];
    bool ok = true;
    for (const auto& cond : p.conditions) {
      if (!detail::condition_holds(space.params()[space.index_of(cond.parent)], cond, cfg)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (const auto it = partial.values.find(p.name); it != partial.values.end())
      cfg.values.emplace(p.name, it->second);
    else
      cfg.values.emplace(p.name, p.default_value);
  }
  return cfg;
}

}  // namespace cash
