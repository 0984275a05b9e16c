// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// Run configuration: a small TOML-style key/value file (sections, quoted
// strings, numbers, booleans, '#' comments). Flags override file values,
// file values override defaults.
//
//   mode = "replay"
//   fixtures = "fixtures.jsonl"
//   seed = 7
//
//   [backend.gpt41]
//   base_url = "https://api.openai.com/v1"
//   model = "gpt-4.1"
//
//   [roles]
//   judge = "gpt41"
//   probe.0 = "qwen3"

#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "forge/cot.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/gateway.hpp"

namespace forge {

using ConfigValue = std::variant<std::string, double, bool>;

/// Flat view of a config file: "section.key" -> value ("key" at top level).
inline std::map<std::string, ConfigValue> parse_config_text(std::string_view input) {
  std::map<std::string, ConfigValue> out;
  std::string section;
  auto lines = text::split_lines(input);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line_no = i + 1;
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::ConfigInvalid, "line " + std::to_string(line_no) + ": " + why, line_no);
    };
    std::string_view line = lines[i];
    // strip comments outside quotes
    bool in_quotes = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
      if (line[k] == '"' && (k == 0 || line[k - 1] != '\\')) in_quotes = !in_quotes;
      if (line[k] == '#' && !in_quotes) {
        line = line.substr(0, k);
        break;
      }
    }
    line = text::trim_view(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("unterminated section header");
      section = text::trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw fail("empty section name");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected key = value");
    auto key = text::trim(line.substr(0, eq));
    auto raw = text::trim(line.substr(eq + 1));
    if (key.empty() || raw.empty()) throw fail("empty key or value");
    ConfigValue value;
    if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"') throw fail("unterminated string");
      std::string s;
      for (std::size_t k = 1; k + 1 < raw.size(); ++k) {
        if (raw[k] == '\\' && k + 2 < raw.size()) {
          ++k;
          s.push_back(raw[k] == 'n' ? '\n' : raw[k]);
        } else {
          s.push_back(raw[k]);
        }
      }
      value = s;
    } else if (raw == "true" || raw == "false") {
      value = raw == "true";
    } else {
      char* end = nullptr;
      double d = std::strtod(raw.c_str(), &end);
      if (end == raw.c_str() || *end != '\0') throw fail("cannot parse value '" + raw + "'");
      value = d;
    }
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

enum class RunMode { Live, Scripted, Record, Replay };

inline std::optional<RunMode> parse_run_mode(std::string_view s) {
  if (s == "live") return RunMode::Live;
  if (s == "scripted") return RunMode::Scripted;
  if (s == "record") return RunMode::Record;
  if (s == "replay") return RunMode::Replay;
  return std::nullopt;
}

inline std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::Live: return "live";
    case RunMode::Scripted: return "scripted";
    case RunMode::Record: return "record";
    case RunMode::Replay: return "replay";
  }
  return "live";
}

struct BackendSpec {
  std::string id;
  std::string base_url;
  std::string model;
  std::string api_key_env;  // defaults to REWATCH_API_KEY_<ID>
  double timeout_s = 120.0;
};

inline std::string default_key_env(std::string_view backend_id) {
  std::string out = "REWATCH_API_KEY_";
  for (char c : backend_id)
    out.push_back(std::isalnum(static_cast<unsigned char>(c))
                      ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                      : '_');
  return out;
}

struct ForgeConfig {
  RunMode mode = RunMode::Live;
  std::string fixtures;
  std::map<std::string, BackendSpec> backends;
  std::map<ModelRole, std::string> roles;  // role -> backend id

  int workers = 4;
  std::optional<std::int64_t> seed;
  double theta_text = 1.0;
  double theta_sum = 1.0;
  int quota_per_type = 3;
  int max_steps = 11;
  ObserverMode observer = ObserverMode::Deterministic;
  bool gt_check = true;
  bool full_breakdown = false;

  // live rate limit; disabled unless both are set
  std::optional<double> rate_capacity;
  std::optional<double> rate_refill_per_s;
  bool rate_blocking = true;
  int retry_max_attempts = 3;
  double retry_initial_delay_s = 1.0;

  std::string host = "127.0.0.1";
  int port = 8080;
  int max_inflight = 8;
  double item_timeout_s = 120.0;
  std::string caption_store;
};

namespace detail {

template <class T>
T config_get(const std::map<std::string, ConfigValue>& kv, const std::string& key, T fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if constexpr (std::is_same_v<T, std::string>) {
    if (auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw Error(ErrorCode::ConfigInvalid, key + " must be a string");
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto* b = std::get_if<bool>(&it->second)) return *b;
    throw Error(ErrorCode::ConfigInvalid, key + " must be true or false");
  } else {
    if (auto* d = std::get_if<double>(&it->second)) return static_cast<T>(*d);
    throw Error(ErrorCode::ConfigInvalid, key + " must be a number");
  }
}

}  // namespace detail

inline ForgeConfig config_from_text(std::string_view input) {
  auto kv = parse_config_text(input);
  ForgeConfig c;
  using detail::config_get;
  auto mode = config_get<std::string>(kv, "mode", "live");
  auto parsed_mode = parse_run_mode(mode);
  if (!parsed_mode) throw Error(ErrorCode::ConfigInvalid, "unknown mode '" + mode + "'");
  c.mode = *parsed_mode;
  c.fixtures = config_get<std::string>(kv, "fixtures", "");
  c.workers = config_get<int>(kv, "workers", c.workers);
  if (kv.count("seed")) c.seed = config_get<std::int64_t>(kv, "seed", 0);
  c.theta_text = config_get<double>(kv, "theta_text", c.theta_text);
  c.theta_sum = config_get<double>(kv, "theta_sum", c.theta_sum);
  c.quota_per_type = config_get<int>(kv, "quota_per_type", c.quota_per_type);
  c.max_steps = config_get<int>(kv, "max_steps", c.max_steps);
  auto observer = config_get<std::string>(kv, "observer", "deterministic");
  if (observer == "deterministic") c.observer = ObserverMode::Deterministic;
  else if (observer == "model") c.observer = ObserverMode::ModelBacked;
  else throw Error(ErrorCode::ConfigInvalid, "observer must be deterministic or model");
  c.gt_check = config_get<bool>(kv, "gt_check", c.gt_check);
  c.full_breakdown = config_get<bool>(kv, "full_breakdown", c.full_breakdown);

  if (kv.count("rate_limit.capacity")) c.rate_capacity = config_get<double>(kv, "rate_limit.capacity", 0);
  if (kv.count("rate_limit.refill_per_s"))
    c.rate_refill_per_s = config_get<double>(kv, "rate_limit.refill_per_s", 0);
  c.rate_blocking = config_get<bool>(kv, "rate_limit.blocking", c.rate_blocking);
  c.retry_max_attempts = config_get<int>(kv, "retry.max_attempts", c.retry_max_attempts);
  c.retry_initial_delay_s = config_get<double>(kv, "retry.initial_delay_s", c.retry_initial_delay_s);

  c.host = config_get<std::string>(kv, "service.host", c.host);
  c.port = config_get<int>(kv, "service.port", c.port);
  c.max_inflight = config_get<int>(kv, "service.max_inflight", c.max_inflight);
  c.item_timeout_s = config_get<double>(kv, "service.item_timeout_s", c.item_timeout_s);
  c.caption_store = config_get<std::string>(kv, "service.caption_store", c.caption_store);

  constexpr std::string_view kBackend = "backend.";
  constexpr std::string_view kRoles = "roles.";
  for (const auto& [key, value] : kv) {
    if (key.rfind(kBackend, 0) == 0) {
      auto rest = key.substr(kBackend.size());
      auto dot = rest.rfind('.');
      if (dot == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "bad backend key " + key);
      auto id = rest.substr(0, dot);
      auto field = rest.substr(dot + 1);
      auto& entry = c.backends[id];
      entry.id = id;
      if (field == "base_url") entry.base_url = config_get<std::string>(kv, key, "");
      else if (field == "model") entry.model = config_get<std::string>(kv, key, "");
      else if (field == "api_key_env") entry.api_key_env = config_get<std::string>(kv, key, "");
      else if (field == "timeout_s") entry.timeout_s = config_get<double>(kv, key, 120.0);
      else throw Error(ErrorCode::ConfigInvalid, "unknown backend field " + key);
    } else if (key.rfind(kRoles, 0) == 0) {
      auto role = parse_role(key.substr(kRoles.size()));
      if (!role) throw Error(ErrorCode::ConfigInvalid, "unknown role " + key.substr(kRoles.size()));
      c.roles[*role] = config_get<std::string>(kv, key, "");
    }
  }
  for (auto& [id, entry] : c.backends)
    if (entry.api_key_env.empty()) entry.api_key_env = default_key_env(id);
  return c;
}

inline ForgeConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_text(buf.str());
}

enum class Command { Caption, QA, CoT, Score, Serve, Stats, ExportSft };

/// Roles a command dispatches to; Probe stands for the whole ensemble.
inline std::vector<RoleKind> required_roles(Command cmd, const ForgeConfig& c) {
  switch (cmd) {
    case Command::Caption: return {RoleKind::Seg, RoleKind::Cap};
    case Command::QA:
      return {RoleKind::Sum,    RoleKind::QAGen,  RoleKind::Verify,
              RoleKind::Probe,  RoleKind::Rewrite, RoleKind::Judge};
    case Command::CoT:
      if (c.observer == ObserverMode::ModelBacked)
        return {RoleKind::Reasoner, RoleKind::Observer, RoleKind::Convert, RoleKind::Judge};
      return {RoleKind::Reasoner, RoleKind::Convert, RoleKind::Judge};
    case Command::Score:
    case Command::Serve: return {RoleKind::Judge, RoleKind::Infer};
    case Command::Stats:
    case Command::ExportSft: return {};
  }
  return {};
}

inline std::size_t role_kind_count(const ForgeConfig& c, RoleKind kind) {
  std::size_t n = 0;
  for (const auto& [role, id] : c.roles) n += role.kind == kind ? 1 : 0;
  return n;
}

inline std::size_t contiguous_probe_count(const ForgeConfig& c) {
  std::size_t n = 0;
  while (c.roles.count(ModelRole::probe(static_cast<int>(n)))) ++n;
  return n;
}

/// Throws ConfigInvalid unless every role the command needs is mapped to a
/// defined backend, the mode has what it needs, and generative stages have a seed.
inline void validate_config(const ForgeConfig& c, Command cmd) {
  auto fail = [](const std::string& why) { return Error(ErrorCode::ConfigInvalid, why); };
  for (auto kind : required_roles(cmd, c)) {
    if (kind == RoleKind::Probe) {
      if (!c.roles.count(ModelRole::probe(0)))
        throw fail("the probe ensemble is empty: map at least probe.0");
      continue;
    }
    if (!c.roles.count({kind, 0})) throw fail("role '" + role_kind_name(kind) + "' is not mapped to a backend");
  }
  for (const auto& [role, backend] : c.roles) {
    if (!c.backends.count(backend))
      throw fail("role '" + role_name(role) + "' uses undefined backend '" + backend + "'");
  }
  if (role_kind_count(c, RoleKind::Probe) != contiguous_probe_count(c))
    throw fail("probe roles must be numbered probe.0, probe.1, ... without gaps");
  bool generative = cmd == Command::Caption || cmd == Command::QA || cmd == Command::CoT;
  if (generative && !c.seed) throw fail("a seed is required for generative stages");
  if (cmd == Command::Stats || cmd == Command::ExportSft) return;
  if ((c.mode == RunMode::Scripted || c.mode == RunMode::Replay || c.mode == RunMode::Record) &&
      c.fixtures.empty())
    throw fail("mode " + std::string(to_string(c.mode)) + " needs a fixtures file");
  if (c.mode == RunMode::Live || c.mode == RunMode::Record) {
    for (const auto& [role, id] : c.roles) {
      const auto& entry = c.backends.at(id);
      if (entry.base_url.empty() || entry.model.empty())
        throw fail("backend '" + id + "' needs base_url and model in live mode");
    }
  }
  if (!(c.theta_text > 0 && c.theta_text <= 1) || !(c.theta_sum > 0 && c.theta_sum <= 1))
    throw fail("thresholds must lie in (0, 1]");
  if (c.max_steps < 1) throw fail("max_steps must be >= 1");
  if (c.quota_per_type < 0) throw fail("quota_per_type must be >= 0");
  if (c.workers < 1) throw fail("workers must be >= 1");
  if (c.max_inflight < 1) throw fail("service.max_inflight must be >= 1");
}

/// Digest of every setting that changes stage outputs; worker counts, paths
/// and the run mode are excluded so a replayed resume matches a live start.
inline std::string config_digest(const ForgeConfig& c, Command cmd) {
  json roles = json::object();
  for (const auto& [role, id] : c.roles) {
    const auto& entry = c.backends.count(id) ? c.backends.at(id) : BackendSpec{};
    roles[role_name(role)] = {{"backend", id}, {"model", entry.model}};
  }
  json j = {{"command", static_cast<int>(cmd)},
            {"seed", c.seed ? json(*c.seed) : json(nullptr)},
            {"theta_text", c.theta_text},
            {"theta_sum", c.theta_sum},
            {"quota_per_type", c.quota_per_type},
            {"max_steps", c.max_steps},
            {"observer", c.observer == ObserverMode::Deterministic ? "deterministic" : "model"},
            {"gt_check", c.gt_check},
            {"full_breakdown", c.full_breakdown},
            {"roles", std::move(roles)}};
  return sha256_hex(j.dump());
}

}  // namespace forge
