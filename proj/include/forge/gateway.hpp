// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/prompts.hpp"
#include "forge/text.hpp"

namespace forge {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Roles

enum class RoleKind {
  Seg,
  Cap,
  Sum,
  QAGen,
  Verify,
  Probe,
  Rewrite,
  Reasoner,
  Observer,
  Convert,
  Infer,
  Judge,
};

struct ModelRole {
  RoleKind kind = RoleKind::Judge;
  int probe_index = 0;  // meaningful only for RoleKind::Probe

  static ModelRole probe(int index) { return {RoleKind::Probe, index}; }

  friend bool operator==(const ModelRole& a, const ModelRole& b) {
    return a.kind == b.kind && (a.kind != RoleKind::Probe || a.probe_index == b.probe_index);
  }
  friend bool operator<(const ModelRole& a, const ModelRole& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.kind == RoleKind::Probe && a.probe_index < b.probe_index;
  }
};

inline std::string role_kind_name(RoleKind kind) {
  switch (kind) {
    case RoleKind::Seg: return "seg";
    case RoleKind::Cap: return "cap";
    case RoleKind::Sum: return "sum";
    case RoleKind::QAGen: return "qagen";
    case RoleKind::Verify: return "verify";
    case RoleKind::Probe: return "probe";
    case RoleKind::Rewrite: return "rewrite";
    case RoleKind::Reasoner: return "reasoner";
    case RoleKind::Observer: return "observer";
    case RoleKind::Convert: return "convert";
    case RoleKind::Infer: return "infer";
    case RoleKind::Judge: return "judge";
  }
  return "unknown";
}

/// "judge", "probe.0", ...
inline std::string role_name(const ModelRole& role) {
  if (role.kind == RoleKind::Probe) return "probe." + std::to_string(role.probe_index);
  return role_kind_name(role.kind);
}

inline std::optional<ModelRole> parse_role(std::string_view name) {
  static const RoleKind kinds[] = {RoleKind::Seg,      RoleKind::Cap,      RoleKind::Sum,
                                   RoleKind::QAGen,    RoleKind::Verify,   RoleKind::Rewrite,
                                   RoleKind::Reasoner, RoleKind::Observer, RoleKind::Convert,
                                   RoleKind::Infer,    RoleKind::Judge};
  for (auto k : kinds) {
    if (name == role_kind_name(k)) return ModelRole{k, 0};
  }
  constexpr std::string_view kProbe = "probe.";
  if (name.substr(0, kProbe.size()) == kProbe && name.size() > kProbe.size()) {
    auto digits = name.substr(kProbe.size());
    if (digits.find_first_not_of("0123456789") != std::string_view::npos) return std::nullopt;
    return ModelRole::probe(std::stoi(std::string(digits)));
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Requests and responses

enum class Speaker { System, User, Assistant };

inline std::string to_string(Speaker s) {
  switch (s) {
    case Speaker::System: return "system";
    case Speaker::User: return "user";
    case Speaker::Assistant: return "assistant";
  }
  return "user";
}

struct Message {
  Speaker speaker = Speaker::User;
  std::string content;
  std::vector<std::string> media;  // opaque references, never dereferenced here
};

struct SamplingParams {
  double temperature = 0.0;
  int max_tokens = 4096;
  std::optional<std::int64_t> seed;
};

/// Temperature 0 for the checking roles, 0.7 for the generative ones.
inline SamplingParams default_sampling(RoleKind kind) {
  SamplingParams p;
  switch (kind) {
    case RoleKind::Verify:
    case RoleKind::Judge:
    case RoleKind::Infer:
    case RoleKind::Observer:
      p.temperature = 0.0;
      break;
    default:
      p.temperature = 0.7;
      break;
  }
  return p;
}

enum class DetailHint { Low, High };

struct ChatRequest {
  ModelRole role;
  std::vector<Message> messages;
  SamplingParams sampling;
  std::optional<DetailHint> detail_hint;

  void validate() const {
    if (messages.empty())
      throw Error(ErrorCode::InvalidArgument, "chat request has no messages");
    for (const auto& m : messages) {
      if (m.speaker == Speaker::System) continue;
      if (m.speaker != Speaker::User)
        throw Error(ErrorCode::InvalidArgument, "first non-system message must be from user");
      break;
    }
    if (sampling.temperature < 0.0 || sampling.temperature > 2.0)
      throw Error(ErrorCode::InvalidArgument, "temperature outside [0,2]");
    if (sampling.max_tokens <= 0)
      throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
  }
};

/// Single user-turn request with the role's default sampling.
inline ChatRequest make_request(ModelRole role, std::string prompt,
                                std::vector<std::string> media = {},
                                std::optional<DetailHint> hint = std::nullopt) {
  ChatRequest req;
  req.role = role;
  req.messages.push_back({Speaker::User, std::move(prompt), std::move(media)});
  req.sampling = default_sampling(role.kind);
  req.detail_hint = hint;
  return req;
}

/// Copy of `req` with `reminder` appended to the final message, used for the
/// single re-ask every strict parser allows.
inline ChatRequest with_reminder(ChatRequest req, std::string_view reminder) {
  auto& last = req.messages.back();
  last.content += "\n\n";
  last.content += reminder;
  return req;
}

/// Canonical form hashed for fixture lookup: role, messages, sampling without
/// the seed, and the detail hint. Keys are emitted sorted.
inline json canonical_request(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    messages.push_back({{"speaker", to_string(m.speaker)},
                        {"content", m.content},
                        {"media", m.media}});
  }
  json j = {{"role", role_name(req.role)},
            {"messages", std::move(messages)},
            {"sampling",
             {{"temperature", req.sampling.temperature},
              {"max_tokens", req.sampling.max_tokens}}}};
  if (req.detail_hint)
    j["detail_hint"] = *req.detail_hint == DetailHint::Low ? "low" : "high";
  return j;
}

inline std::string request_digest(const ChatRequest& req) {
  return sha256_hex(canonical_request(req).dump());
}

enum class Provenance { Live, Scripted, Replayed };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Live: return "live";
    case Provenance::Scripted: return "scripted";
    case Provenance::Replayed: return "replay";
  }
  return "live";
}

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  Usage usage;
  Provenance provenance = Provenance::Live;
};

// ---------------------------------------------------------------------------
// Backends

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
  virtual Provenance provenance() const = 0;
};

/// Deterministic backend keyed on request digest. Fixture files hold one
/// `{"digest": hex, "text": string}` object per line. An optional responder
/// answers requests missing from the table (test doubles, simulators).
class ScriptedBackend : public Backend {
 public:
  using Responder = std::function<std::optional<std::string>(const ChatRequest&)>;

  explicit ScriptedBackend(std::string id = "scripted",
                           Provenance provenance = Provenance::Scripted)
      : id_(std::move(id)), provenance_(provenance) {}

  void add(const std::string& digest, std::string text) {
    std::lock_guard lock(mu_);
    table_.emplace(digest, std::move(text));
  }
  void add(const ChatRequest& request, std::string text) {
    add(request_digest(request), std::move(text));
  }

  void set_responder(Responder responder) {
    std::lock_guard lock(mu_);
    responder_ = std::move(responder);
  }

  /// Loads a fixture file; the first occurrence of a digest wins.
  void load_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open fixture file " + path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (text::trim_view(line).empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, path + ": " + e.what(), n);
      }
      if (!j.contains("digest") || !j["digest"].is_string() || !j.contains("text") ||
          !j["text"].is_string())
        throw Error(ErrorCode::SchemaViolation, path + ": fixture needs digest and text", n);
      add(j["digest"].get<std::string>(), j["text"].get<std::string>());
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return table_.size();
  }

  ChatResponse complete(const ChatRequest& request) override {
    auto digest = request_digest(request);
    Responder responder;
    {
      std::lock_guard lock(mu_);
      if (auto it = table_.find(digest); it != table_.end())
        return {it->second, {0, 0}, provenance_};
      responder = responder_;
    }
    if (responder) {
      if (auto text = responder(request)) return {*text, {0, 0}, provenance_};
    }
    throw Error(ErrorCode::ScriptMiss,
                "no scripted response for role " + role_name(request.role) + " digest " + digest);
  }

  std::string id() const override { return id_; }
  Provenance provenance() const override { return provenance_; }

 private:
  std::string id_;
  Provenance provenance_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> table_;
  Responder responder_;
};

/// Thread-safe append-only writer for the fixture format.
class FixtureRecorder {
 public:
  explicit FixtureRecorder(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      try {
        auto j = json::parse(line);
        seen_.insert(j.at("digest").get<std::string>());
      } catch (const std::exception&) {
        // torn or foreign lines are ignored; replay will reject them
      }
    }
  }

  void record(const std::string& digest, const std::string& text) {
    std::lock_guard lock(mu_);
    if (!seen_.insert(digest).second) return;
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot append to fixture file " + path_);
    out << json{{"digest", digest}, {"text", text}}.dump() << '\n';
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mu_;
  std::unordered_set<std::string> seen_;
};

/// Wraps a live backend and captures every response into a fixture file.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<FixtureRecorder> recorder)
      : inner_(std::move(inner)), recorder_(std::move(recorder)) {}

  ChatResponse complete(const ChatRequest& request) override {
    auto response = inner_->complete(request);
    recorder_->record(request_digest(request), response.text);
    return response;
  }
  std::string id() const override { return inner_->id(); }
  Provenance provenance() const override { return inner_->provenance(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<FixtureRecorder> recorder_;
};

// ---------------------------------------------------------------------------
// Rate limiting

/// Seconds-based clock with an injectable sleep so tests can run on virtual time.
struct Clock {
  std::function<double()> now;
  std::function<void(double)> sleep;

  static Clock steady() {
    auto origin = std::chrono::steady_clock::now();
    return {[origin] {
              return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin)
                  .count();
            },
            [](double s) {
              if (s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
            }};
  }
};

/// Token bucket of `capacity` tokens refilled continuously at `refill_per_s`.
/// Starts full.
class TokenBucket {
 public:
  TokenBucket(double capacity, double refill_per_s, Clock clock = Clock::steady())
      : capacity_(capacity), refill_(refill_per_s), clock_(std::move(clock)) {
    if (capacity_ < 1.0 || refill_ <= 0.0)
      throw Error(ErrorCode::InvalidArgument, "token bucket needs capacity >= 1 and refill > 0");
    tokens_ = capacity_;
    last_ = clock_.now();
  }

  /// Takes one token. Blocking mode sleeps until one is available;
  /// non-blocking mode throws RateLimited. Returns the dispatch time.
  double acquire(bool blocking = true) {
    std::unique_lock lock(mu_);
    for (;;) {
      refill_locked();
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return last_;
      }
      if (!blocking) throw Error(ErrorCode::RateLimited, "request budget exhausted");
      double wait = (1.0 - tokens_) / refill_;
      lock.unlock();
      clock_.sleep(wait);
      lock.lock();
    }
  }

  double capacity() const { return capacity_; }
  double refill_per_s() const { return refill_; }
  double now() const { return clock_.now(); }

 private:
  void refill_locked() {
    double t = clock_.now();
    tokens_ = std::min(capacity_, tokens_ + (t - last_) * refill_);
    last_ = t;
  }

  double capacity_;
  double refill_;
  Clock clock_;
  std::mutex mu_;
  double tokens_ = 0;
  double last_ = 0;
};

// ---------------------------------------------------------------------------
// Gateway

struct DispatchRecord {
  ModelRole role;
  std::string backend_id;
  std::string digest;
  double time_s = 0;  // rate-limiter clock; 0 when no limiter is installed
  Provenance provenance = Provenance::Live;
};

/// The one place model requests leave the process. Routes roles to backends,
/// applies the rate limit to live backends and keeps a dispatch log.
class Gateway {
 public:
  struct Options {
    bool blocking_rate_limit = true;
  };

  Gateway() = default;
  explicit Gateway(Options options) : options_(options) {}

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  void route(ModelRole role, std::shared_ptr<Backend> backend) {
    std::lock_guard lock(mu_);
    routes_[role] = std::move(backend);
  }

  void set_rate_limiter(std::shared_ptr<TokenBucket> limiter) {
    std::lock_guard lock(mu_);
    limiter_ = std::move(limiter);
  }

  bool has_role(const ModelRole& role) const {
    std::lock_guard lock(mu_);
    return routes_.count(role) != 0;
  }

  /// Number of consecutively numbered probe roles starting at probe.0.
  int probe_count() const {
    std::lock_guard lock(mu_);
    int n = 0;
    while (routes_.count(ModelRole::probe(n))) ++n;
    return n;
  }

  std::optional<std::string> backend_id(const ModelRole& role) const {
    std::lock_guard lock(mu_);
    auto it = routes_.find(role);
    if (it == routes_.end()) return std::nullopt;
    return it->second->id();
  }

  std::optional<Provenance> backend_provenance(const ModelRole& role) const {
    std::lock_guard lock(mu_);
    auto it = routes_.find(role);
    if (it == routes_.end()) return std::nullopt;
    return it->second->provenance();
  }

  ChatResponse chat(const ChatRequest& request) {
    request.validate();
    std::shared_ptr<Backend> backend;
    std::shared_ptr<TokenBucket> limiter;
    {
      std::lock_guard lock(mu_);
      auto it = routes_.find(request.role);
      if (it == routes_.end())
        throw Error(ErrorCode::BackendUnavailable,
                    "no backend configured for role " + role_name(request.role));
      backend = it->second;
      limiter = limiter_;
    }
    DispatchRecord rec{request.role, backend->id(), request_digest(request), 0.0,
                       backend->provenance()};
    if (limiter && backend->provenance() == Provenance::Live)
      rec.time_s = limiter->acquire(options_.blocking_rate_limit);
    {
      std::lock_guard lock(log_mu_);
      log_.push_back(rec);
    }
    return backend->complete(request);
  }

  std::vector<DispatchRecord> dispatch_log() const {
    std::lock_guard lock(log_mu_);
    return log_;
  }

  std::size_t dispatch_count(RoleKind kind) const {
    std::lock_guard lock(log_mu_);
    std::size_t n = 0;
    for (const auto& r : log_) n += r.role.kind == kind ? 1 : 0;
    return n;
  }

  void clear_log() {
    std::lock_guard lock(log_mu_);
    log_.clear();
  }

 private:
  Options options_;
  mutable std::mutex mu_;
  std::map<ModelRole, std::shared_ptr<Backend>> routes_;
  std::shared_ptr<TokenBucket> limiter_;
  mutable std::mutex log_mu_;
  std::vector<DispatchRecord> log_;
};

// ---------------------------------------------------------------------------
// Answer judge

inline constexpr std::string_view kJudgeReminder =
    "Reminder: DIRECTLY output 1 or 0 without any other content.";

/// "1" -> 1, "0" -> 0 after trimming; anything else is unparseable.
inline std::optional<int> parse_judge_bit(std::string_view response) {
  auto t = text::trim_view(response);
  if (t == "1") return 1;
  if (t == "0") return 0;
  return std::nullopt;
}

/// Sends `request` to the Judge role and parses a 0/1 verdict, re-asking once.
inline int ask_judge_bit(Gateway& gateway, const ChatRequest& request) {
  if (auto bit = parse_judge_bit(gateway.chat(request).text)) return *bit;
  auto retry = with_reminder(request, kJudgeReminder);
  auto second = gateway.chat(retry).text;
  if (auto bit = parse_judge_bit(second)) return *bit;
  throw Error(ErrorCode::JudgeUnparseable, "judge replied '" + text::trim(second) + "'");
}

inline int judge_consistency(Gateway& gateway, std::string_view question,
                             std::string_view model_answer, std::string_view gt_answer) {
  if (text::trim_view(question).empty() || text::trim_view(model_answer).empty() ||
      text::trim_view(gt_answer).empty())
    throw Error(ErrorCode::InvalidArgument, "judge_consistency needs non-empty inputs");
  auto prompt = prompts::render_answer_judge(question, model_answer, gt_answer);
  return ask_judge_bit(gateway, make_request({RoleKind::Judge, 0}, std::move(prompt)));
}

}  // namespace forge
