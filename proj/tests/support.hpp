// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// Shared test helpers: temporary directories, file helpers, scripted
// gateways and a deterministic simulator that plays every model role from
// the prompt text alone.

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "forge/forge.hpp"

namespace forge::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path_ = base / ("forge-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::vector<std::string> file_lines(const std::filesystem::path& p) {
  std::vector<std::string> out;
  auto content = read_file(p);
  for (auto& l : text::split_lines(content))
    if (!l.empty()) out.push_back(std::string(l));
  return out;
}

/// Every role, with a two-model probe ensemble.
inline const std::vector<ModelRole>& all_roles() {
  static const std::vector<ModelRole> roles = [] {
    std::vector<ModelRole> r = {{RoleKind::Seg, 0},      {RoleKind::Cap, 0},      {RoleKind::Sum, 0},
                                {RoleKind::QAGen, 0},    {RoleKind::Verify, 0},   {RoleKind::Rewrite, 0},
                                {RoleKind::Reasoner, 0}, {RoleKind::Observer, 0}, {RoleKind::Convert, 0},
                                {RoleKind::Infer, 0},    {RoleKind::Judge, 0}};
    for (int i = 0; i < 2; ++i) r.push_back(ModelRole::probe(i));
    return r;
  }();
  return roles;
}

/// Gateway with one backend behind every role (two probes).
inline std::unique_ptr<Gateway> gateway_with(std::shared_ptr<Backend> backend) {
  auto g = std::make_unique<Gateway>();
  for (const auto& role : all_roles()) g->route(role, backend);
  return g;
}

// ---------------------------------------------------------------------------
// Simulator

namespace sim {

inline std::string after(std::string_view s, std::string_view marker) {
  auto p = s.find(marker);
  return p == std::string_view::npos ? std::string() : std::string(s.substr(p + marker.size()));
}

inline std::string between(std::string_view s, std::string_view a, std::string_view b) {
  auto p = s.find(a);
  if (p == std::string_view::npos) return {};
  p += a.size();
  auto q = s.find(b, p);
  return std::string(s.substr(p, q == std::string_view::npos ? std::string_view::npos : q - p));
}

inline std::string normalize(std::string_view s) {
  auto t = text::to_lower(text::trim(s));
  while (!t.empty() && (t.back() == '.' || t.back() == ' ')) t.pop_back();
  return t;
}

inline std::string strip_period(std::string s) {
  while (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

inline std::string seg_reply(const std::string& prompt) {
  auto duration = parse_clock(between(prompt, "entire duration (", ")")).value_or(60);
  std::string out;
  int k = 1;
  for (double start = 0; start < duration; start += 60, ++k) {
    double end = std::min(duration, start + 60);
    out += "[" + text::format_clock(start) + "-" + text::format_clock(end) + "] Scene " +
           std::to_string(k) + " of the street.\n\n";
  }
  return out;
}

inline std::string cap_reply(const ChatRequest& req) {
  static const char* subjects[] = {"a red car",   "a man in a blue coat", "a dog",
                                   "a woman with a bag", "a cyclist",     "a delivery van",
                                   "two children", "a street vendor"};
  static const char* verbs[] = {"passes the gate",  "opens the door",     "crosses the street",
                                "waves at the camera", "picks up a box",  "sits on the bench",
                                "turns left at the corner", "drops a coffee cup"};
  const auto& prompt = req.messages.back().content;
  auto clip = parse_clock(between(prompt, "lasts ", ".")).value_or(60);
  auto media = req.messages.back().media.empty() ? std::string() : req.messages.back().media[0];
  std::string out;
  for (double rel : {5.0, 30.0}) {
    if (rel >= clip) continue;
    auto h = digest_u64(media + ":" + std::to_string(rel));
    out += "[" + text::format_clock(rel) + "] " + subjects[h % 8] + " " + verbs[(h >> 8) % 8] + ".\n";
  }
  return out;
}

inline std::string qagen_reply(const std::string& prompt) {
  auto caption = between(prompt, "Detailed caption:\n", "\n\nSummary:");
  auto lines = parse_timed_lines(caption, TimedLineMode::Point);
  json arr = json::array();
  if (!lines.empty()) {
    arr.push_back({{"type", "Event Localization"},
                   {"question", "At what time does " + strip_period(lines[0].text) + " happen?"},
                   {"answer", text::format_clock(lines[0].start)}});
  }
  if (lines.size() > 2) {
    arr.push_back({{"type", "Temporal Localization"},
                   {"question", "When does " + strip_period(lines[2].text) + " happen?"},
                   {"answer", text::format_clock(lines[2].start)}});
  }
  arr.push_back({{"type", "Spatial Perception"},
                 {"question", "What is the weather like in the video?"},
                 {"answer", "sunny"}});
  arr.push_back({{"type", "Object Recognition"}, {"question", "What color is the sky?"}, {"answer", "green"}});
  arr.push_back({{"type", "Cause and Effect"},
                 {"question", "Why was the video recorded?"},
                 {"answer", "to show everyday street scenes"}});
  return arr.dump();
}

inline std::string probe_reply(const ChatRequest& req) {
  const auto& q = req.messages.back().content;
  bool with_summary = req.messages.size() > 1;
  if (q.find("weather") != std::string::npos) return "Sunny.";
  if (with_summary && q.find("Why was the video recorded") != std::string::npos)
    return "To show everyday street scenes.";
  return "I don't know.";
}

inline std::string judge_reply(const std::string& prompt) {
  if (prompt.find("Standard Answer: ") != std::string::npos) {
    auto model = between(prompt, "\nModel Answer: ", "\nStandard Answer: ");
    auto gt = between(prompt, "\nStandard Answer: ", "\nYour output:");
    return normalize(model) == normalize(gt) ? "1" : "0";
  }
  auto caption = between(prompt, "Video Caption:\n", "\nAction: ");
  auto obs = between(prompt, "\nObservation: ", "\nYour output:");
  auto lines = text::split_lines(obs);
  for (auto line : lines) {
    auto text = after(line, ": ");
    auto stamp = between(line, "at ", ": ");
    if (text.empty() || caption.find("[" + stamp + "] " + text) == std::string::npos) return "0";
  }
  return "1";
}

inline std::string rewrite_reply(const std::string& prompt) {
  auto answer = between(prompt, "\nCorrect answer: ", "\n");
  json options = json::array({{{"letter", "A"}, {"text", answer}},
                              {{"letter", "B"}, {"text", "It never happens"}},
                              {{"letter", "C"}, {"text", "At the very end"}},
                              {{"letter", "D"}, {"text", "Before the video starts"}}});
  return json{{"options", options}, {"answer", "A"}}.dump();
}

/// retrieval of the event named in the question, query at its timestamp,
/// then the timestamp (or its option letter) as the answer.
inline std::string reasoner_reply(const std::string& prompt) {
  auto question = between(prompt, "\n\nQuestion: ", "\n\nPrevious steps:");
  auto reminder = question.find("\n\nReminder:");
  if (reminder != std::string::npos) question = question.substr(0, reminder);
  auto stem = text::split_lines(question).front();
  std::size_t steps = 0;
  for (auto p = prompt.find("\nStep "); p != std::string::npos; p = prompt.find("\nStep ", p + 1)) ++steps;

  std::string target = between(stem, "At what time does ", " happen?");
  if (target.empty()) target = between(stem, "When does ", " happen?");
  if (target.empty()) return "I cannot look this up. ACTION final_answer(\"unknown\")";
  if (steps == 0)
    return "I need to find when " + target + ". ACTION segment_retrieval(\"" + target + "\")";
  auto first_obs = between(prompt, "\nObservation: at ", ":");
  auto stamp = between(prompt, "\nObservation: at ", ": ");
  if (steps == 1)
    return "The retrieval points to " + stamp + ", so I re-watch that moment.\nACTION segment_query(\"" +
           stamp + "\")";
  std::string answer = stamp;
  for (auto line : text::split_lines(question)) {
    if (line.size() > 3 && line[1] == '.' && line.substr(3) == stamp) answer = std::string(line.substr(0, 1));
  }
  (void)first_obs;
  return "The clip confirms it happens at " + stamp + ".\nACTION final_answer(\"" + answer + "\")";
}

inline std::string convert_reply(const std::string& prompt) {
  auto traj = after(prompt, "Trajectory:\n");
  auto reminder = traj.find("\n\nReminder:");
  if (reminder != std::string::npos) traj = traj.substr(0, reminder);
  std::string out, obs;
  bool in_obs = false;
  auto flush = [&] {
    if (in_obs) out += "<observation>" + obs + "</observation>\n";
    in_obs = false;
    obs.clear();
  };
  for (auto line : text::split_lines(traj)) {
    std::string l(line);
    if (l.rfind("Thought: ", 0) == 0) {
      flush();
      out += l.substr(9) + "\n";
    } else if (l.rfind("Action: ", 0) == 0) {
      flush();
      out += "<action>" + l.substr(8) + "</action>\n";
    } else if (l.rfind("Observation: ", 0) == 0) {
      in_obs = true;
      obs = l.substr(13);
    } else if (l.rfind("Final answer: ", 0) == 0) {
      flush();
      out += "So the answer is <answer>" + l.substr(14) + "</answer>";
    } else if (in_obs) {
      obs += "\n" + l;
    }
  }
  return out;
}

inline std::string infer_reply(const std::string& prompt) {
  std::string last;
  for (auto line : text::split_lines(prompt)) {
    auto stamp = between(line, ": at ", ": ");
    if (line.rfind("Observation ", 0) == 0 && !stamp.empty()) last = stamp;
  }
  return last.empty() ? "unknown" : last;
}

}  // namespace sim

/// Deterministic stand-in for every model role, driven only by the request.
inline std::optional<std::string> simulate(const ChatRequest& req) {
  const auto& prompt = req.messages.back().content;
  switch (req.role.kind) {
    case RoleKind::Seg: return sim::seg_reply(prompt);
    case RoleKind::Cap: return sim::cap_reply(req);
    case RoleKind::Sum: return "A short video of ordinary street scenes.";
    case RoleKind::QAGen: return sim::qagen_reply(prompt);
    case RoleKind::Verify: return prompt.find("color is the sky") != std::string::npos ? "False" : "True";
    case RoleKind::Probe: return sim::probe_reply(req);
    case RoleKind::Rewrite: return sim::rewrite_reply(prompt);
    case RoleKind::Reasoner: return sim::reasoner_reply(prompt);
    case RoleKind::Observer: return "nothing relevant";
    case RoleKind::Convert: return sim::convert_reply(prompt);
    case RoleKind::Infer: return sim::infer_reply(prompt);
    case RoleKind::Judge: return sim::judge_reply(prompt);
  }
  return std::nullopt;
}

inline std::shared_ptr<ScriptedBackend> simulator_backend(Provenance p = Provenance::Scripted) {
  auto b = std::make_shared<ScriptedBackend>("simulator", p);
  b->set_responder(simulate);
  return b;
}

/// Three synthetic videos of 150 s, 95 s and 200 s.
inline std::vector<VideoRef> synthetic_videos() {
  return {{"vid-a", "file://corpus/vid-a.mp4", 150, "synthetic-street"},
          {"vid-b", "file://corpus/vid-b.mp4", 95, "synthetic-street"},
          {"vid-c", "file://corpus/vid-c.mp4", 200, "synthetic-park"}};
}

inline void write_manifest(const std::filesystem::path& p, const std::vector<VideoRef>& videos) {
  std::vector<json> records;
  for (const auto& v : videos) records.push_back(to_json(v));
  write_records(p, records);
}

}  // namespace forge::testing
