// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "forge/http_backend.hpp"

namespace forge {
namespace {

/// Chat-completions stub answering with a programmable status sequence.
class StubServer {
 public:
  explicit StubServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/api/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      bodies_.push_back(req.body);
      auth_ = req.get_header_value("Authorization");
      int status = calls_ < statuses_.size() ? statuses_[calls_] : 200;
      ++calls_;
      res.status = status;
      if (status == 200) {
        json out = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", "hello"}}}}})},
                    {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 3}}}};
        res.set_content(out.dump(), "application/json");
      } else {
        res.set_content("{\"error\":\"busy\"}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/api/v1/"; }
  std::size_t calls() {
    std::lock_guard lock(mu_);
    return calls_;
  }
  json body(std::size_t i) {
    std::lock_guard lock(mu_);
    return json::parse(bodies_.at(i));
  }
  std::string auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<int> statuses_;
  std::size_t calls_ = 0;
  std::vector<std::string> bodies_;
  std::string auth_;
};

RetryPolicy recording_policy(std::vector<double>& sleeps, int attempts = 3) {
  RetryPolicy p;
  p.max_attempts = attempts;
  p.sleep = [&sleeps](double s) { sleeps.push_back(s); };
  return p;
}

TEST(SplitBaseUrl, OriginAndPrefix) {
  EXPECT_EQ(split_base_url("https://api.example.com/v1/"),
            std::make_pair(std::string("https://api.example.com"), std::string("/v1")));
  EXPECT_EQ(split_base_url("http://h:81"), std::make_pair(std::string("http://h:81"), std::string()));
}

TEST(WireBody, MediaBecomesContentParts) {
  auto req = make_request({RoleKind::Cap, 0}, "describe", {"file:///v.mp4#t=0,60"}, DetailHint::High);
  req.sampling.seed = 9;
  auto body = chat_completions_body(req, "m1");
  EXPECT_EQ(body["model"], "m1");
  EXPECT_EQ(body["seed"], 9);
  EXPECT_EQ(body["detail_hint"], "high");
  const auto& content = body["messages"][0]["content"];
  ASSERT_TRUE(content.is_array());
  EXPECT_EQ(content[0]["text"], "describe");
  EXPECT_EQ(content[1]["video_url"]["url"], "file:///v.mp4#t=0,60");
  auto plain = chat_completions_body(make_request({RoleKind::Judge, 0}, "q"), "m2");
  EXPECT_TRUE(plain["messages"][0]["content"].is_string());
  EXPECT_FALSE(plain.contains("seed"));
}

TEST(HttpBackend, RetriesOn429And5xxWithBackoff) {
  StubServer server({429, 503});
  std::vector<double> sleeps;
  HttpBackend backend({"b", server.base_url(), "m", "secret", 5}, recording_policy(sleeps));
  auto res = backend.complete(make_request({RoleKind::Judge, 0}, "q"));
  EXPECT_EQ(res.text, "hello");
  EXPECT_EQ(res.usage.prompt_tokens, 7);
  EXPECT_EQ(res.provenance, Provenance::Live);
  EXPECT_EQ(server.calls(), 3u);
  EXPECT_EQ(sleeps, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(server.auth(), "Bearer secret");
  EXPECT_EQ(server.body(2)["messages"][0]["content"], "q");
}

TEST(HttpBackend, GivesUpAfterMaxAttempts) {
  StubServer server({500, 500, 500, 500});
  std::vector<double> sleeps;
  HttpBackend backend({"b", server.base_url(), "m", "", 5}, recording_policy(sleeps));
  try {
    backend.complete(make_request({RoleKind::Judge, 0}, "q"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
  }
  EXPECT_EQ(server.calls(), 3u);
  EXPECT_EQ(server.auth(), "");
}

TEST(HttpBackend, ClientErrorsAreNotRetried) {
  StubServer server({400});
  std::vector<double> sleeps;
  HttpBackend backend({"b", server.base_url(), "m", "", 5}, recording_policy(sleeps));
  EXPECT_THROW(backend.complete(make_request({RoleKind::Judge, 0}, "q")), Error);
  EXPECT_EQ(server.calls(), 1u);
  EXPECT_TRUE(sleeps.empty());
}

TEST(HttpBackend, TransportErrorIsUnavailable) {
  std::vector<double> sleeps;
  HttpBackend backend({"b", "http://127.0.0.1:9/v1", "m", "", 1}, recording_policy(sleeps, 2));
  try {
    backend.complete(make_request({RoleKind::Judge, 0}, "q"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
    EXPECT_NE(std::string(e.what()).find("transport error"), std::string::npos);
  }
  EXPECT_EQ(sleeps.size(), 1u);
}

TEST(RetryPolicy, DelayIsCapped) {
  RetryPolicy p;
  EXPECT_EQ(p.delay_before(2), 1.0);
  EXPECT_EQ(p.delay_before(3), 2.0);
  EXPECT_EQ(p.delay_before(4), 4.0);
  EXPECT_EQ(p.delay_before(6), 4.0);
}

}  // namespace
}  // namespace forge
