#pragma once

#include <set>
#include <string>

#include "envsmith/client.hpp"
#include "envsmith/envdir.hpp"
#include "envsmith/erpo.hpp"

namespace envsmith {

enum class ClientBackend { None, Builtin, Http };
enum class CassetteMode { Off, Record, Replay };
enum class AdvantageMode { Env, Group };

/// Everything the pipeline stages need, loaded from one JSON file. Unknown
/// keys are rejected so a typo cannot silently fall back to a default.
struct PipelineConfig {
  std::string env_name = "shop";
  uint64_t seed = 1;
  size_t population = 20;

  size_t walk_count = 100;
  size_t walk_min_len = 3;
  size_t walk_max_len = 8;

  size_t max_reasoning = 2;
  size_t task_limit = 32;  // sequences considered per gen-tasks run

  size_t group_size = 8;
  size_t max_turns = 40;
  double faithful_prob = 0.625;
  size_t user_patience = 1;

  AdvantageMode advantage_mode = AdvantageMode::Env;
  double std_floor = 1e-6;
  double clip_epsilon = 0.2;
  double kl_beta = 0.0;
  KlEstimator kl_estimator = KlEstimator::Simple;

  ClientBackend backend = ClientBackend::Builtin;
  CassetteMode cassette_mode = CassetteMode::Off;
  std::string cassette;  // path, relative to the workdir unless absolute
  HttpClientConfig http;

  std::string prompts_dir = "prompts";

  json to_json() const;
  static PipelineConfig from_json(const json& j);
  static PipelineConfig load(const fs::path& path) { return from_json(read_json(path)); }
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigInvalid("unknown key '" + it.key() + "' in " + where);
}

}  // namespace detail

inline json PipelineConfig::to_json() const {
  json j = json::object();
  j["env"] = env_name;
  j["seed"] = seed;
  j["population"] = population;
  j["walks"] = json{{"count", walk_count}, {"min_len", walk_min_len}, {"max_len", walk_max_len}};
  j["max_reasoning"] = max_reasoning;
  j["task_limit"] = task_limit;
  j["group_size"] = group_size;
  j["max_turns"] = max_turns;
  j["faithful_prob"] = faithful_prob;
  j["user_patience"] = user_patience;
  j["advantage_mode"] = advantage_mode == AdvantageMode::Env ? "env" : "group";
  j["std_floor"] = std_floor;
  j["clip_epsilon"] = clip_epsilon;
  j["kl_beta"] = kl_beta;
  j["kl_estimator"] = kl_estimator == KlEstimator::Simple ? "simple" : "neg_log";
  json c = json::object();
  c["backend"] = backend == ClientBackend::None ? "none"
                 : backend == ClientBackend::Builtin ? "builtin"
                                                     : "http";
  c["cassette_mode"] = cassette_mode == CassetteMode::Off ? "off"
                       : cassette_mode == CassetteMode::Record ? "record"
                                                               : "replay";
  if (!cassette.empty()) c["cassette"] = cassette;
  if (backend == ClientBackend::Http) {
    c["http"] = json{{"host", http.host},         {"port", http.port},
                     {"path", http.path},         {"model", http.model},
                     {"api_key_env", http.api_key_env}, {"timeout_seconds", http.timeout_seconds}};
  }
  j["client"] = std::move(c);
  j["prompts_dir"] = prompts_dir;
  return j;
}

inline PipelineConfig PipelineConfig::from_json(const json& j) {
  detail::reject_unknown_keys(
      j,
      {"env", "seed", "population", "walks", "max_reasoning", "task_limit", "group_size",
       "max_turns", "faithful_prob", "user_patience", "advantage_mode", "std_floor",
       "clip_epsilon", "kl_beta", "kl_estimator", "client", "prompts_dir"},
      "config");
  PipelineConfig c;
  c.env_name = j.value("env", c.env_name);
  c.seed = j.value("seed", c.seed);
  c.population = j.value("population", c.population);
  if (j.contains("walks")) {
    const json& w = j.at("walks");
    detail::reject_unknown_keys(w, {"count", "min_len", "max_len"}, "config.walks");
    c.walk_count = w.value("count", c.walk_count);
    c.walk_min_len = w.value("min_len", c.walk_min_len);
    c.walk_max_len = w.value("max_len", c.walk_max_len);
  }
  c.max_reasoning = j.value("max_reasoning", c.max_reasoning);
  c.task_limit = j.value("task_limit", c.task_limit);
  c.group_size = j.value("group_size", c.group_size);
  c.max_turns = j.value("max_turns", c.max_turns);
  c.faithful_prob = j.value("faithful_prob", c.faithful_prob);
  c.user_patience = j.value("user_patience", c.user_patience);
  std::string mode = j.value("advantage_mode", "env");
  if (mode == "env")
    c.advantage_mode = AdvantageMode::Env;
  else if (mode == "group")
    c.advantage_mode = AdvantageMode::Group;
  else
    throw ConfigInvalid("advantage_mode must be 'env' or 'group', got '" + mode + "'");
  c.std_floor = j.value("std_floor", c.std_floor);
  c.clip_epsilon = j.value("clip_epsilon", c.clip_epsilon);
  c.kl_beta = j.value("kl_beta", c.kl_beta);
  std::string kl = j.value("kl_estimator", "simple");
  if (kl == "simple")
    c.kl_estimator = KlEstimator::Simple;
  else if (kl == "neg_log")
    c.kl_estimator = KlEstimator::NegLog;
  else
    throw ConfigInvalid("kl_estimator must be 'simple' or 'neg_log', got '" + kl + "'");
  if (j.contains("client")) {
    const json& cl = j.at("client");
    detail::reject_unknown_keys(cl, {"backend", "cassette_mode", "cassette", "http"},
                                "config.client");
    std::string backend = cl.value("backend", "builtin");
    if (backend == "none")
      c.backend = ClientBackend::None;
    else if (backend == "builtin")
      c.backend = ClientBackend::Builtin;
    else if (backend == "http")
      c.backend = ClientBackend::Http;
    else
      throw ConfigInvalid("client.backend must be none, builtin or http, got '" + backend + "'");
    std::string cm = cl.value("cassette_mode", "off");
    if (cm == "off")
      c.cassette_mode = CassetteMode::Off;
    else if (cm == "record")
      c.cassette_mode = CassetteMode::Record;
    else if (cm == "replay")
      c.cassette_mode = CassetteMode::Replay;
    else
      throw ConfigInvalid("client.cassette_mode must be off, record or replay, got '" + cm + "'");
    c.cassette = cl.value("cassette", "");
    if (cl.contains("http")) {
      const json& h = cl.at("http");
      detail::reject_unknown_keys(
          h, {"host", "port", "path", "model", "api_key_env", "timeout_seconds"},
          "config.client.http");
      c.http.host = h.value("host", c.http.host);
      c.http.port = h.value("port", c.http.port);
      c.http.path = h.value("path", c.http.path);
      c.http.model = h.value("model", c.http.model);
      c.http.api_key_env = h.value("api_key_env", c.http.api_key_env);
      c.http.timeout_seconds = h.value("timeout_seconds", c.http.timeout_seconds);
    }
  }
  c.prompts_dir = j.value("prompts_dir", c.prompts_dir);

  if (c.population == 0) throw ConfigInvalid("population must be positive");
  if (c.walk_count == 0) throw ConfigInvalid("walks.count must be positive");
  if (c.walk_min_len == 0 || c.walk_min_len > c.walk_max_len)
    throw ConfigInvalid("walk length bounds must satisfy 1 <= min_len <= max_len");
  if (c.group_size < 2) throw ConfigInvalid("group_size must be at least 2");
  if (c.max_turns == 0) throw ConfigInvalid("max_turns must be positive");
  if (c.faithful_prob < 0.0 || c.faithful_prob > 1.0)
    throw ConfigInvalid("faithful_prob must lie in [0, 1]");
  if (c.clip_epsilon <= 0.0 || c.clip_epsilon >= 1.0)
    throw ConfigInvalid("clip_epsilon must lie in (0, 1)");
  if (c.std_floor < 0.0) throw ConfigInvalid("std_floor cannot be negative");
  if (c.kl_beta < 0.0) throw ConfigInvalid("kl_beta cannot be negative");
  if (c.cassette_mode != CassetteMode::Off && c.cassette.empty())
    throw ConfigInvalid("cassette_mode needs a cassette path");
  return c;
}

}  // namespace envsmith
