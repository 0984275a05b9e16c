// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "forge/store.hpp"

namespace forge {

/// Token counter used for every *_tokens statistic. Whitespace splitting by default.
using Tokenizer = std::function<std::size_t(std::string_view)>;

inline std::size_t whitespace_tokens(std::string_view s) { return text::split_whitespace(s).size(); }

struct TokenStat {
  std::size_t count = 0;
  std::size_t sum = 0;
  std::size_t max = 0;

  void add(std::size_t v) {
    ++count;
    sum += v;
    max = std::max(max, v);
  }
  std::optional<double> avg() const {
    if (count == 0) return std::nullopt;
    return static_cast<double>(sum) / static_cast<double>(count);
  }
  std::optional<std::size_t> maximum() const {
    if (count == 0) return std::nullopt;
    return max;
  }
};

inline constexpr double kShortVideoS = 180.0;   // < 3 min
inline constexpr double kMediumVideoS = 1200.0; // < 20 min; longer is Long

struct StatsReport {
  std::size_t total_videos = 0;
  std::map<std::string, std::size_t> videos_by_source;
  std::size_t short_videos = 0;
  std::size_t medium_videos = 0;
  std::size_t long_videos = 0;
  TokenStat caption_tokens;
  TokenStat summary_tokens;

  std::size_t total_questions = 0;
  std::map<QuestionType, std::size_t> questions_by_type;
  std::size_t multiple_choice = 0;
  std::size_t open_ended = 0;
  TokenStat question_tokens;  // question plus rendered options
  TokenStat answer_tokens;

  std::size_t total_cot = 0;
  TokenStat reasoning_steps;  // well-formed <action> blocks per trace
  TokenStat reasoning_tokens;
};

inline StatsReport compute_statistics(const DataPaths& paths, const Tokenizer& tokens = whitespace_tokens) {
  StatsReport r;
  for (auto& info : kQuestionTypes) r.questions_by_type[info.type] = 0;

  for (const auto& j : load_optional(paths.videos, RecordKind::Video)) {
    auto v = video_from_json(j);
    ++r.total_videos;
    ++r.videos_by_source[v.source];
    if (v.duration_s < kShortVideoS) ++r.short_videos;
    else if (v.duration_s < kMediumVideoS) ++r.medium_videos;
    else ++r.long_videos;
  }
  for (const auto& j : load_optional(paths.captions, RecordKind::Caption))
    r.caption_tokens.add(tokens(serialize_caption(caption_from_json(j))));
  for (const auto& j : load_optional(paths.summaries, RecordKind::Summary))
    r.summary_tokens.add(tokens(j["text"].get<std::string>()));
  for (const auto& j : load_optional(paths.qa, RecordKind::QA)) {
    auto qa = qa_from_json(j);
    ++r.total_questions;
    ++r.questions_by_type[qa.qtype];
    (qa.form == QAForm::MultipleChoice ? r.multiple_choice : r.open_ended)++;
    r.question_tokens.add(tokens(render_question(qa)));
    r.answer_tokens.add(tokens(qa.answer));
  }
  for (const auto& j : load_optional(paths.cot, RecordKind::CoT)) {
    auto text = j["text"].get<std::string>();
    ++r.total_cot;
    r.reasoning_steps.add(count_actions(text));
    r.reasoning_tokens.add(tokens(text));
  }
  return r;
}

inline json to_json(const TokenStat& s) {
  json j;
  j["avg"] = s.avg() ? json(*s.avg()) : json(nullptr);
  j["max"] = s.maximum() ? json(*s.maximum()) : json(nullptr);
  return j;
}

inline json to_json(const StatsReport& r) {
  json by_type = json::object();
  for (const auto& [t, n] : r.questions_by_type) by_type[std::string(to_string(t))] = n;
  return {
      {"videos",
       {{"total", r.total_videos},
        {"by_source", r.videos_by_source},
        {"by_duration", {{"short", r.short_videos}, {"medium", r.medium_videos}, {"long", r.long_videos}}},
        {"caption_tokens", to_json(r.caption_tokens)},
        {"summary_tokens", to_json(r.summary_tokens)}}},
      {"questions",
       {{"total", r.total_questions},
        {"by_type", std::move(by_type)},
        {"by_form", {{"multiple_choice", r.multiple_choice}, {"open_ended", r.open_ended}}},
        {"question_tokens", to_json(r.question_tokens)},
        {"answer_tokens", to_json(r.answer_tokens)}}},
      {"cot",
       {{"total", r.total_cot},
        {"reasoning_steps", to_json(r.reasoning_steps)},
        {"reasoning_tokens", to_json(r.reasoning_tokens)}}},
  };
}

namespace detail {

inline std::string pct(std::size_t n, std::size_t total) {
  if (total == 0) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, " (%.1f%%)", 100.0 * static_cast<double>(n) / static_cast<double>(total));
  return buf;
}

inline std::string avg_max(const TokenStat& s) {
  if (s.count == 0) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f/%zu", *s.avg(), s.max);
  return buf;
}

}  // namespace detail

inline std::string render_stats_table(const StatsReport& r) {
  std::ostringstream os;
  auto row = [&](const std::string& label, const std::string& value) {
    os << label;
    for (std::size_t i = label.size(); i < 34; ++i) os << ' ';
    os << value << '\n';
  };
  row("Total Videos", std::to_string(r.total_videos));
  row("- Video Source", "");
  for (const auto& [src, n] : r.videos_by_source)
    row("    " + (src.empty() ? std::string("(unknown)") : src), std::to_string(n) + detail::pct(n, r.total_videos));
  row("- Video Duration", "");
  row("    Short (< 3 min)", std::to_string(r.short_videos));
  row("    Medium (3 ~ 20 min)", std::to_string(r.medium_videos));
  row("    Long (>= 20 min)", std::to_string(r.long_videos));
  row("Caption Token (avg/max)", detail::avg_max(r.caption_tokens));
  row("Summary Token (avg/max)", detail::avg_max(r.summary_tokens));
  row("Total Questions", std::to_string(r.total_questions));
  row("- Dimensions", "");
  for (const auto& info : kQuestionTypes) {
    auto n = r.questions_by_type.at(info.type);
    row("    " + std::string(info.display), std::to_string(n) + detail::pct(n, r.total_questions));
  }
  row("- Types", "");
  row("    Multiple-choice", std::to_string(r.multiple_choice) + detail::pct(r.multiple_choice, r.total_questions));
  row("    Open-ended", std::to_string(r.open_ended) + detail::pct(r.open_ended, r.total_questions));
  row("Question Token (avg/max)", detail::avg_max(r.question_tokens));
  row("Answer Token (avg/max)", detail::avg_max(r.answer_tokens));
  row("Total Chain of Thought", std::to_string(r.total_cot));
  row("Reasoning Steps (avg/max)", detail::avg_max(r.reasoning_steps));
  row("Reasoning Token (avg/max)", detail::avg_max(r.reasoning_tokens));
  return os.str();
}

}  // namespace forge
