// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include "forge/config.hpp"
#include "forge/http_backend.hpp"

namespace forge {

/// Builds a gateway for the configured mode: live and record dispatch over
/// HTTP (record also appends every response to the fixture file), scripted
/// and replay answer from the fixture file only.
inline std::unique_ptr<Gateway> build_gateway(const ForgeConfig& config) {
  auto gateway = std::make_unique<Gateway>(Gateway::Options{config.rate_blocking});
  std::map<std::string, std::shared_ptr<Backend>> backends;
  std::shared_ptr<FixtureRecorder> recorder;
  if (config.mode == RunMode::Record) recorder = std::make_shared<FixtureRecorder>(config.fixtures);

  auto backend_for = [&](const std::string& id) -> std::shared_ptr<Backend> {
    if (auto it = backends.find(id); it != backends.end()) return it->second;
    std::shared_ptr<Backend> b;
    if (config.mode == RunMode::Scripted || config.mode == RunMode::Replay) {
      auto scripted = std::make_shared<ScriptedBackend>(
          id, config.mode == RunMode::Replay ? Provenance::Replayed : Provenance::Scripted);
      scripted->load_fixture(config.fixtures);
      b = scripted;
    } else {
      const auto& entry = config.backends.at(id);
      HttpBackendConfig http{id, entry.base_url, entry.model, "", entry.timeout_s};
      if (const char* key = std::getenv(entry.api_key_env.c_str())) http.api_key = key;
      RetryPolicy retry;
      retry.max_attempts = config.retry_max_attempts;
      retry.initial_delay_s = config.retry_initial_delay_s;
      b = std::make_shared<HttpBackend>(std::move(http), retry);
      if (recorder) b = std::make_shared<RecordingBackend>(b, recorder);
    }
    backends.emplace(id, b);
    return b;
  };

  for (const auto& [role, id] : config.roles) gateway->route(role, backend_for(id));
  if (config.rate_capacity && config.rate_refill_per_s)
    gateway->set_rate_limiter(
        std::make_shared<TokenBucket>(*config.rate_capacity, *config.rate_refill_per_s));
  return gateway;
}

}  // namespace forge
