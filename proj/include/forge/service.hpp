// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// HTTP/JSON front end for O&R scoring.
//
//   POST /v1/score   {"items":[{"id","question","response_text","gt_answer",
//                                "caption_events":[{"t_s","text"}]}]}
//                 -> {"items":[{"id","r_acc","r_obs","r_rea","r_fmt","r_total","error"?}]}
//   GET  /v1/health  {"status":"ok","backends":{"judge","infer"},"provenance"}
//
// With a caption store configured, an item may carry "caption_id" instead of
// "caption_events".

#pragma once

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <set>
#include <string>
#include <thread>
#include <utility>

#include "forge/reward.hpp"
#include "forge/store.hpp"
#include "forge/thread_pool.hpp"

namespace forge {

struct ServiceOptions {
  int max_inflight = 8;
  double item_timeout_s = 120.0;
  ScoreOptions score;
};

/// Current and peak number of samples being scored.
class InflightGauge {
 public:
  void enter() {
    std::lock_guard lock(mu_);
    ++current_;
    peak_ = std::max(peak_, current_);
  }
  void leave() {
    std::lock_guard lock(mu_);
    --current_;
    idle_.notify_all();
  }
  int current() const {
    std::lock_guard lock(mu_);
    return current_;
  }
  int peak() const {
    std::lock_guard lock(mu_);
    return peak_;
  }
  void reset_peak() {
    std::lock_guard lock(mu_);
    peak_ = current_;
  }
  void wait_idle() {
    std::unique_lock lock(mu_);
    idle_.wait(lock, [&] { return current_ == 0; });
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable idle_;
  int current_ = 0;
  int peak_ = 0;
};

inline std::map<std::string, DetailedCaption> load_caption_store(const std::filesystem::path& path) {
  std::map<std::string, DetailedCaption> out;
  for (const auto& j : load_records(path, RecordKind::Caption)) {
    auto c = caption_from_json(j);
    out.emplace(c.video_id, std::move(c));
  }
  return out;
}

class RewardService {
 public:
  using CaptionStore = std::map<std::string, DetailedCaption>;

  RewardService(std::shared_ptr<Gateway> gateway, ServiceOptions options, CaptionStore store = {}) {
    reload(std::move(gateway), options, std::move(store));
  }

  ~RewardService() {
    stop();
    gauge_.wait_idle();
  }

  RewardService(const RewardService&) = delete;
  RewardService& operator=(const RewardService&) = delete;

  /// Swaps backends and limits; requests already running finish on the old ones.
  void reload(std::shared_ptr<Gateway> gateway, ServiceOptions options, CaptionStore store = {}) {
    if (!gateway) throw Error(ErrorCode::InvalidArgument, "service needs a gateway");
    if (options.max_inflight < 1) throw Error(ErrorCode::ConfigInvalid, "max_inflight must be >= 1");
    auto state = std::make_shared<State>(std::move(gateway), options, std::move(store));
    std::lock_guard lock(mu_);
    state_ = std::move(state);
  }

  json health() const {
    auto s = snapshot();
    auto id = [&](RoleKind k) {
      auto b = s->gateway->backend_id({k, 0});
      return b ? json(*b) : json(nullptr);
    };
    auto prov = s->gateway->backend_provenance({RoleKind::Judge, 0});
    return {{"status", "ok"},
            {"backends", {{"judge", id(RoleKind::Judge)}, {"infer", id(RoleKind::Infer)}}},
            {"provenance", prov ? to_string(*prov) : "none"}};
  }

  /// Transport-independent core of POST /v1/score: (HTTP status, body).
  std::pair<int, json> handle_score(const std::string& body) {
    auto s = snapshot();
    std::vector<RewardSample> samples;
    std::vector<std::optional<std::string>> problems;
    try {
      parse_request(body, *s, samples, problems);
    } catch (const Error& e) {
      return {400, {{"error", e.what()}}};
    }
    try {
      auto workers = std::min<int>(s->options.max_inflight, static_cast<int>(samples.size()));
      auto results = parallel_map(samples.size(), workers, [&](std::size_t i) {
        if (problems[i]) {
          RewardBreakdown b;
          b.error = *problems[i];
          return b;
        }
        return score_with_deadline(s, samples[i]);
      });
      json items = json::array();
      for (std::size_t i = 0; i < samples.size(); ++i) items.push_back(to_json(results[i], samples[i].id));
      return {200, {{"items", std::move(items)}}};
    } catch (const std::exception& e) {
      return {500, {{"error", std::string("internal error: ") + e.what()}}};
    }
  }

  const InflightGauge& gauge() const { return gauge_; }
  InflightGauge& gauge() { return gauge_; }

  // -------------------------------------------------------------------------
  // HTTP

  /// Binds to `port` (0 picks a free one) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host, int port) {
    server_ = std::make_unique<httplib::Server>();
    server_->Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      auto [status, out] = handle_score(req.body);
      res.status = status;
      res.set_content(out.dump(), "application/json");
    });
    server_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(health().dump(), "application/json");
    });
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
  }

  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  void stop() {
    if (server_) server_->stop();
    wait();
  }

 private:
  struct State {
    State(std::shared_ptr<Gateway> g, ServiceOptions o, CaptionStore c)
        : gateway(std::move(g)), options(o), captions(std::move(c)), slots(o.max_inflight) {}
    std::shared_ptr<Gateway> gateway;
    ServiceOptions options;
    CaptionStore captions;
    std::counting_semaphore<> slots;
  };

  std::shared_ptr<State> snapshot() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  static void parse_request(const std::string& body, const State& s, std::vector<RewardSample>& samples,
                            std::vector<std::optional<std::string>>& problems) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, std::string("malformed JSON: ") + e.what());
    }
    auto bad = [](const std::string& why) { return Error(ErrorCode::SchemaViolation, why); };
    if (!j.is_object() || !j.contains("items") || !j["items"].is_array())
      throw bad("body must be an object with an \"items\" array");
    if (j["items"].empty()) throw bad("\"items\" must not be empty");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < j["items"].size(); ++i) {
      const auto& item = j["items"][i];
      auto where = "items[" + std::to_string(i) + "]";
      if (!item.is_object()) throw bad(where + " is not an object");
      for (const char* f : {"id", "question", "response_text", "gt_answer"})
        if (!item.contains(f) || !item[f].is_string())
          throw bad(where + ": \"" + f + "\" must be a string");
      RewardSample sample;
      sample.id = item["id"].get<std::string>();
      if (!seen.insert(sample.id).second) throw bad("duplicate id '" + sample.id + "'");
      sample.question = item["question"].get<std::string>();
      sample.response_text = item["response_text"].get<std::string>();
      sample.gt_answer = item["gt_answer"].get<std::string>();
      std::optional<std::string> problem;
      if (item.contains("caption_events")) {
        if (!item["caption_events"].is_array()) throw bad(where + ": \"caption_events\" must be an array");
        try {
          sample.caption.events = events_from_json(item["caption_events"]);
        } catch (const std::exception& e) {
          throw bad(where + ": bad caption_events: " + e.what());
        }
        sample.caption.video_id = sample.id;
      } else if (item.contains("caption_id") && item["caption_id"].is_string()) {
        auto cid = item["caption_id"].get<std::string>();
        auto it = s.captions.find(cid);
        if (it == s.captions.end()) problem = "unknown caption_id '" + cid + "'";
        else sample.caption = it->second;
      } else {
        throw bad(where + ": needs \"caption_events\"" +
                  std::string(s.captions.empty() ? "" : " or \"caption_id\""));
      }
      samples.push_back(std::move(sample));
      problems.push_back(std::move(problem));
    }
  }

  /// Scores on a detached thread holding one inflight slot; the caller stops
  /// waiting at the deadline, the slot is released when scoring actually ends.
  RewardBreakdown score_with_deadline(const std::shared_ptr<State>& s, const RewardSample& sample) {
    s->slots.acquire();
    gauge_.enter();
    auto promise = std::make_shared<std::promise<RewardBreakdown>>();
    auto future = promise->get_future();
    std::thread([this, s, sample, promise] {
      RewardBreakdown b;
      try {
        b = score(*s->gateway, sample, s->options.score);
      } catch (const std::exception& e) {
        b.error = e.what();
      }
      promise->set_value(std::move(b));
      s->slots.release();
      gauge_.leave();
    }).detach();
    auto timeout = std::chrono::duration<double>(s->options.item_timeout_s);
    if (future.wait_for(timeout) != std::future_status::ready) {
      RewardBreakdown b;
      b.error = "timeout: scoring exceeded " + format_seconds(s->options.item_timeout_s) + "s";
      return b;
    }
    return future.get();
  }

  mutable std::mutex mu_;
  std::shared_ptr<State> state_;
  InflightGauge gauge_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace forge
