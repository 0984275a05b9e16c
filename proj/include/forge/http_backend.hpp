// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <httplib.h>

#include <chrono>
#include <functional>
#include <string>
#include <thread>

#include "forge/gateway.hpp"

namespace forge {

/// Exponential backoff on transport errors, 429 and 5xx. Other statuses fail
/// immediately.
struct RetryPolicy {
  int max_attempts = 3;
  double initial_delay_s = 1.0;
  double multiplier = 2.0;
  double max_delay_s = 4.0;
  std::function<void(double)> sleep = [](double s) {
    std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };

  double delay_before(int attempt) const {  // attempt >= 2
    double d = initial_delay_s;
    for (int i = 2; i < attempt; ++i) d *= multiplier;
    return std::min(d, max_delay_s);
  }

  static bool retryable_status(int status) { return status == 429 || status >= 500; }
};

struct HttpBackendConfig {
  std::string id;
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key;
  double timeout_s = 120.0;
};

/// Splits "scheme://host[:port][/prefix]" into the client origin and path prefix.
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  auto prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

/// OpenAI-compatible chat-completions wire body.
inline json chat_completions_body(const ChatRequest& req, const std::string& model) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    json msg = {{"role", to_string(m.speaker)}};
    if (m.media.empty()) {
      msg["content"] = m.content;
    } else {
      json parts = json::array();
      parts.push_back({{"type", "text"}, {"text", m.content}});
      for (const auto& ref : m.media)
        parts.push_back({{"type", "video_url"}, {"video_url", {{"url", ref}}}});
      msg["content"] = std::move(parts);
    }
    messages.push_back(std::move(msg));
  }
  json body = {{"model", model},
               {"messages", std::move(messages)},
               {"temperature", req.sampling.temperature},
               {"max_tokens", req.sampling.max_tokens}};
  if (req.sampling.seed) body["seed"] = *req.sampling.seed;
  if (req.detail_hint) body["detail_hint"] = *req.detail_hint == DetailHint::Low ? "low" : "high";
  return body;
}

class HttpBackend : public Backend {
 public:
  HttpBackend(HttpBackendConfig config, RetryPolicy retry = {})
      : config_(std::move(config)), retry_(std::move(retry)) {
    std::tie(origin_, prefix_) = split_base_url(config_.base_url);
  }

  ChatResponse complete(const ChatRequest& request) override {
    auto body = chat_completions_body(request, config_.model).dump();
    std::string last_error;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
      if (attempt > 1) retry_.sleep(retry_.delay_before(attempt));
      httplib::Client client(origin_);
      auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::duration<double>(config_.timeout_s));
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      httplib::Headers headers;
      if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = client.Post(prefix_ + "/chat/completions", headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 200) return parse(res->body);
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      if (!RetryPolicy::retryable_status(res->status)) break;
    }
    throw Error(ErrorCode::BackendUnavailable, config_.id + ": " + last_error);
  }

  std::string id() const override { return config_.id; }
  Provenance provenance() const override { return Provenance::Live; }

 private:
  ChatResponse parse(const std::string& body) const {
    try {
      auto j = json::parse(body);
      ChatResponse out;
      out.provenance = Provenance::Live;
      const auto& content = j.at("choices").at(0).at("message").at("content");
      out.text = content.is_string() ? content.get<std::string>() : std::string();
      if (j.contains("usage") && j["usage"].is_object()) {
        out.usage.prompt_tokens = std::max<std::int64_t>(0, j["usage"].value("prompt_tokens", 0));
        out.usage.completion_tokens =
            std::max<std::int64_t>(0, j["usage"].value("completion_tokens", 0));
      }
      return out;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::BackendUnavailable,
                  config_.id + ": malformed completion body: " + e.what());
    }
  }

  HttpBackendConfig config_;
  RetryPolicy retry_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace forge
