#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cash/errors.hpp"
#include "cash/evaluator.hpp"
#include "cash/param_space.hpp"
#include "cash/smbo.hpp"

namespace cash {

using json = nlohmann::json;

// --- configs ---------------------------------------------------------------

inline json config_to_json(const Config& cfg) {
  json j = json::object();
  for (const auto& [name, value] : cfg.values) {
    if (const auto* i = std::get_if<std::int64_t>(&value)) j[name] = *i;
    else if (const auto* d = std::get_if<double>(&value)) j[name] = *d;
    else j[name] = std::get<std::string>(value);
  }
  return j;
}

inline Config config_from_json(const json& j) {
  Config cfg;
  for (const auto& [name, value] : j.items()) {
    if (value.is_number_integer()) cfg.values[name] = value.get<std::int64_t>();
    else if (value.is_number_float()) cfg.values[name] = value.get<double>();
    else if (value.is_string()) cfg.values[name] = value.get<std::string>();
    else throw ConfigError("unsupported value type for parameter " + name);
  }
  return cfg;
}

// --- space definition files --------------------------------------------------

inline json space_to_json(const ParamSpace& space) {
  json params = json::array();
  for (const auto& p : space.params()) {
    json jp;
    jp["name"] = p.name;
    switch (p.kind) {
      case DomainKind::categorical:
        jp["type"] = "categorical";
        jp["levels"] = p.levels;
        jp["default"] = std::get<std::string>(p.default_value);
        break;
      case DomainKind::integer:
        jp["type"] = "integer";
        jp["range"] = {p.ilo, p.ihi};
        jp["default"] = std::get<std::int64_t>(p.default_value);
        break;
      case DomainKind::real:
        jp["type"] = "real";
        jp["range"] = {p.lo, p.hi};
        jp["default"] = std::get<double>(p.default_value);
        break;
    }
    if (p.kind != DomainKind::categorical)
      jp["prior"] = p.prior == Prior::log_uniform ? "log-uniform" : "uniform";
    if (!p.conditions.empty()) {
      json conds = json::array();
      for (const auto& c : p.conditions) conds.push_back({{"parent", c.parent}, {"values", c.values}});
      jp["conditions"] = conds;
    }
    params.push_back(jp);
  }
  return json{{"root", space.root()}, {"params", params}};
}

inline ParamSpace space_from_json(const json& j) {
  std::vector<ParamSpec> specs;
  for (const auto& jp : j.at("params")) {
    ParamSpec p;
    p.name = jp.at("name").get<std::string>();
    const std::string type = jp.at("type").get<std::string>();
    if (jp.contains("prior"))
      p.prior = jp["prior"].get<std::string>() == "log-uniform" ? Prior::log_uniform
                                                                : Prior::uniform;
    if (type == "categorical") {
      p.kind = DomainKind::categorical;
      p.levels = jp.at("levels").get<std::vector<std::string>>();
      p.default_value = jp.at("default").get<std::string>();
    } else if (type == "integer") {
      p.kind = DomainKind::integer;
      p.ilo = jp.at("range")[0].get<std::int64_t>();
      p.ihi = jp.at("range")[1].get<std::int64_t>();
      p.default_value = jp.at("default").get<std::int64_t>();
    } else if (type == "real") {
      p.kind = DomainKind::real;
      p.lo = jp.at("range")[0].get<double>();
      p.hi = jp.at("range")[1].get<double>();
      p.default_value = jp.at("default").get<double>();
    } else {
      throw ConfigError("unknown parameter type: " + type);
    }
    if (jp.contains("conditions")) {
      for (const auto& jc : jp["conditions"]) {
        Condition c;
        c.parent = jc.at("parent").get<std::string>();
        c.values = jc.at("values").get<std::vector<std::string>>();
        p.conditions.push_back(std::move(c));
      }
    }
    specs.push_back(std::move(p));
  }
  return ParamSpace::validate(std::move(specs), j.at("root").get<std::string>());
}

// --- run histories (line-delimited JSON) -------------------------------------

inline std::string history_to_jsonl(const RunHistory& history) {
  std::ostringstream out;
  for (int id = 0; id < history.config_count(); ++id) {
    json line{{"type", "config"}, {"id", id}, {"config", config_to_json(history.config(id))}};
    out << line.dump() << '\n';
  }
  for (const auto& r : history.records()) {
    json line{{"type", "record"},
              {"config_id", r.config_id},
              {"fold", r.fold},
              {"loss", r.loss},
              {"budget_exhausted", r.budget_exhausted},
              {"wall_time_s", r.wall_time_s}};
    out << line.dump() << '\n';
  }
  for (const auto& t : history.trajectory()) {
    json line{{"type", "incumbent"},
              {"evaluations", t.evaluations},
              {"config_id", t.config_id},
              {"cv_loss", t.cv_loss}};
    out << line.dump() << '\n';
  }
  return out.str();
}

inline RunHistory history_from_jsonl(const std::string& text) {
  RunHistory history;
  std::vector<TrajectoryPoint> trajectory;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "config") {
      const int id = history.register_config(config_from_json(j.at("config")));
      if (id != j.at("id").get<int>()) throw DataError("history config ids out of order");
    } else if (type == "record") {
      FoldLossRecord r;
      r.config_id = j.at("config_id").get<int>();
      r.fold = j.at("fold").get<int>();
      r.loss = j.at("loss").get<double>();
      r.budget_exhausted = j.at("budget_exhausted").get<bool>();
      r.wall_time_s = j.at("wall_time_s").get<double>();
      history.append(r);
    } else if (type == "incumbent") {
      trajectory.push_back({j.at("evaluations").get<long long>(), j.at("config_id").get<int>(),
                            j.at("cv_loss").get<double>()});
    }
  }
  history.restore_trajectory(std::move(trajectory));
  return history;
}

// --- run results -------------------------------------------------------------

// Wall-clock durations are intentionally absent: two runs with the same
// flags and seeds must serialize byte-identically.
inline json run_result_to_json(const RunResult& run) {
  json trajectory = json::array();
  for (const auto& t : run.trajectory)
    trajectory.push_back({{"evaluations", t.evaluations},
                          {"config_id", t.config_id},
                          {"cv_loss", t.cv_loss}});
  json j;
  j["schema"] = "cash.run_result.v1";
  j["seed"] = run.seed;
  j["evaluations"] = run.evaluations;
  j["incumbent"] = {{"id", run.incumbent_id},
                    {"cv_loss", run.incumbent_loss},
                    {"config", config_to_json(run.incumbent)}};
  j["trajectory"] = trajectory;
  return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace cash
