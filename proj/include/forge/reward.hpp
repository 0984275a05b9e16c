// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// Observation & Reasoning reward for one rollout:
//
//   r_total = r_acc * (1 + r_obs + r_rea) + r_fmt
//
// r_fmt checks the tag grammar, r_acc judges the final answer, r_obs is the
// mean per-step faithfulness of observations against the detailed caption and
// r_rea judges an answer inferred from the actions/observations alone.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forge/caption.hpp"
#include "forge/error.hpp"
#include "forge/gateway.hpp"
#include "forge/prompts.hpp"
#include "forge/thread_pool.hpp"

namespace forge {

enum class TagKind { Action, Observation, Answer };

struct TagToken {
  TagKind kind;
  bool closing = false;
  std::size_t begin = 0;  // offset of '<'
  std::size_t end = 0;    // one past '>'
};

struct TaggedSpan {
  TagKind kind;
  std::string content;
};

struct ActionObservation {
  std::string action;
  std::string observation;

  friend bool operator==(const ActionObservation&, const ActionObservation&) = default;
};

struct ParsedTrace {
  std::vector<ActionObservation> pairs;
  std::optional<std::string> answer;

  std::size_t size() const { return pairs.size(); }
  friend bool operator==(const ParsedTrace&, const ParsedTrace&) = default;
};

/// Every action/observation/answer tag in document order.
inline std::vector<TagToken> scan_tags(std::string_view text) {
  static constexpr std::pair<std::string_view, TagKind> kTags[] = {
      {"action", TagKind::Action},
      {"observation", TagKind::Observation},
      {"answer", TagKind::Answer},
  };
  std::vector<TagToken> out;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string_view::npos) {
    bool matched = false;
    bool closing = pos + 1 < text.size() && text[pos + 1] == '/';
    auto name_at = pos + (closing ? 2 : 1);
    for (const auto& [name, kind] : kTags) {
      if (text.compare(name_at, name.size(), name) == 0 && name_at + name.size() < text.size() &&
          text[name_at + name.size()] == '>') {
        out.push_back({kind, closing, pos, name_at + name.size() + 1});
        pos = name_at + name.size() + 1;
        matched = true;
        break;
      }
    }
    if (!matched) ++pos;
  }
  return out;
}

/// Well-formed spans: an opening tag immediately followed (among tags) by
/// its own closing tag. Content is trimmed.
inline std::vector<TaggedSpan> well_formed_spans(std::string_view text) {
  auto tags = scan_tags(text);
  std::vector<TaggedSpan> spans;
  for (std::size_t i = 0; i + 1 < tags.size(); ++i) {
    const auto& open = tags[i];
    const auto& close = tags[i + 1];
    if (!open.closing && close.closing && open.kind == close.kind) {
      spans.push_back(
          {open.kind, text::trim(text.substr(open.end, close.begin - open.end))});
      ++i;
    }
  }
  return spans;
}

/// Tolerant parse: pairs every well-formed action with an immediately
/// following well-formed observation; the answer is present only when there
/// is exactly one well-formed answer block.
inline ParsedTrace parse_trace(std::string_view text) {
  auto spans = well_formed_spans(text);
  ParsedTrace out;
  int answers = 0;
  std::string answer;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].kind == TagKind::Answer) {
      ++answers;
      answer = spans[i].content;
    } else if (spans[i].kind == TagKind::Action && i + 1 < spans.size() &&
               spans[i + 1].kind == TagKind::Observation) {
      out.pairs.push_back({spans[i].content, spans[i + 1].content});
      ++i;
    }
  }
  if (answers == 1) out.answer = std::move(answer);
  return out;
}

/// Number of well-formed action blocks; the "reasoning steps" statistic.
inline std::size_t count_actions(std::string_view text) {
  std::size_t n = 0;
  for (const auto& s : well_formed_spans(text)) n += s.kind == TagKind::Action ? 1 : 0;
  return n;
}

/// 1 iff the tags read (<action>x</action> <observation>y</observation>)*
/// <answer>z</answer> with non-empty contents, no nesting, no stray or
/// unclosed tags, and the answer as the last tagged block. Free text between
/// blocks is allowed; a lone answer block is valid.
inline int format_reward(std::string_view text) {
  auto tags = scan_tags(text);
  if (tags.size() < 2 || tags.size() % 2 != 0) return 0;
  std::vector<TagKind> kinds;
  for (std::size_t i = 0; i < tags.size(); i += 2) {
    const auto& open = tags[i];
    const auto& close = tags[i + 1];
    if (open.closing || !close.closing || open.kind != close.kind) return 0;
    if (text::trim_view(text.substr(open.end, close.begin - open.end)).empty()) return 0;
    kinds.push_back(open.kind);
  }
  if (kinds.back() != TagKind::Answer) return 0;
  for (std::size_t i = 0; i + 1 < kinds.size(); ++i) {
    auto expected = i % 2 == 0 ? TagKind::Action : TagKind::Observation;
    if (kinds[i] != expected) return 0;
  }
  return (kinds.size() - 1) % 2 == 0 ? 1 : 0;
}

/// Canonical text for a parsed trace; parse_trace(render_trace(p)) == p for
/// any p whose contents are trimmed, tag-free and non-empty.
inline std::string render_trace(const ParsedTrace& trace) {
  std::string out;
  for (const auto& p : trace.pairs) {
    out += "<action>" + p.action + "</action>\n";
    out += "<observation>" + p.observation + "</observation>\n";
  }
  if (trace.answer) out += "<answer>" + *trace.answer + "</answer>";
  return out;
}

// ---------------------------------------------------------------------------
// Components

/// 0 when there is no answer; otherwise the answer judge's verdict.
inline int accuracy_reward(Gateway& gateway, std::string_view question,
                           const std::optional<std::string>& answer, std::string_view gt) {
  if (text::trim_view(gt).empty()) throw Error(ErrorCode::InvalidArgument, "empty ground truth");
  if (!answer || text::trim_view(*answer).empty()) return 0;
  return judge_consistency(gateway, question, *answer, gt);
}

inline double observation_reward(Gateway& gateway, const ParsedTrace& parsed,
                                 const DetailedCaption& caption, int workers = 1) {
  if (parsed.pairs.empty()) return 0.0;
  auto serialized = serialize_caption(caption);
  auto bits = parallel_map(parsed.pairs.size(), workers, [&](std::size_t i) {
    auto prompt = text::render_template(prompts::kObservationJudge,
                                        {{"caption", serialized},
                                         {"action", parsed.pairs[i].action},
                                         {"observation", parsed.pairs[i].observation}});
    return ask_judge_bit(gateway, make_request({RoleKind::Judge, 0}, std::move(prompt)));
  });
  int sum = 0;
  for (int b : bits) sum += b;
  return static_cast<double>(sum) / static_cast<double>(bits.size());
}

inline std::string render_steps(const std::vector<ActionObservation>& pairs) {
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) out += '\n';
    auto n = std::to_string(i + 1);
    out += "Action " + n + ": " + pairs[i].action + "\nObservation " + n + ": " +
           pairs[i].observation;
  }
  return out;
}

inline int reasoning_reward(Gateway& gateway, std::string_view question, const ParsedTrace& parsed,
                            std::string_view gt) {
  if (text::trim_view(gt).empty()) throw Error(ErrorCode::InvalidArgument, "empty ground truth");
  if (parsed.pairs.empty()) return 0;
  auto prompt = text::render_template(
      prompts::kInfer, {{"question", std::string(question)}, {"steps", render_steps(parsed.pairs)}});
  auto inferred = text::trim(gateway.chat(make_request({RoleKind::Infer, 0}, std::move(prompt))).text);
  if (inferred.empty()) return 0;
  return judge_consistency(gateway, question, inferred, gt);
}

inline double combine_reward(int r_acc, double r_obs, int r_rea, int r_fmt) {
  return static_cast<double>(r_acc) * (1.0 + r_obs + static_cast<double>(r_rea)) +
         static_cast<double>(r_fmt);
}

// ---------------------------------------------------------------------------
// End to end

struct RewardSample {
  std::string id;
  std::string question;
  std::string response_text;
  std::string gt_answer;
  DetailedCaption caption;
};

struct RewardBreakdown {
  int r_acc = 0;
  double r_obs = 0.0;
  int r_rea = 0;
  int r_fmt = 0;
  double r_total = 0.0;
  std::optional<std::string> error;

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

struct ScoreOptions {
  /// Compute r_obs and r_rea even when r_acc = 0 (they cannot change r_total).
  bool full_breakdown = false;
  int judge_workers = 1;
};

inline std::optional<std::string> validate_sample(const RewardSample& s) {
  if (text::trim_view(s.question).empty()) return "question is empty";
  if (text::trim_view(s.response_text).empty()) return "response_text is empty";
  if (text::trim_view(s.gt_answer).empty()) return "gt_answer is empty";
  if (s.caption.events.empty()) return "caption has no events";
  return std::nullopt;
}

/// Never throws for per-sample problems: invalid input and judge/backend
/// failures come back in `error` with the components computed so far.
inline RewardBreakdown score(Gateway& gateway, const RewardSample& sample,
                             const ScoreOptions& options = {}) {
  RewardBreakdown out;
  if (auto problem = validate_sample(sample)) {
    out.error = *problem;
    return out;
  }
  out.r_fmt = format_reward(sample.response_text);
  auto finish = [&] {
    out.r_total = combine_reward(out.r_acc, out.r_obs, out.r_rea, out.r_fmt);
    return out;
  };
  try {
    auto parsed = parse_trace(sample.response_text);
    out.r_acc = accuracy_reward(gateway, sample.question, parsed.answer, sample.gt_answer);
    if (out.r_acc == 1 || options.full_breakdown) {
      out.r_obs = observation_reward(gateway, parsed, sample.caption, options.judge_workers);
      out.r_rea = reasoning_reward(gateway, sample.question, parsed, sample.gt_answer);
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return finish();
}

inline json to_json(const RewardBreakdown& b, const std::string& id) {
  json j = {{"id", id},       {"r_acc", b.r_acc}, {"r_obs", b.r_obs},
            {"r_rea", b.r_rea}, {"r_fmt", b.r_fmt}, {"r_total", b.r_total}};
  if (b.error) j["error"] = *b.error;
  return j;
}

/// Sample wire form shared by `forge score` input and the service:
/// {"id","question","response_text","gt_answer","caption_events":[{"t_s","text"}]}.
inline RewardSample sample_from_json(const json& j) {
  RewardSample s;
  s.id = j.at("id").get<std::string>();
  s.question = j.at("question").get<std::string>();
  s.response_text = j.at("response_text").get<std::string>();
  s.gt_answer = j.at("gt_answer").get<std::string>();
  s.caption.video_id = j.value("video_id", s.id);
  s.caption.events = events_from_json(j.at("caption_events"));
  return s;
}

}  // namespace forge
