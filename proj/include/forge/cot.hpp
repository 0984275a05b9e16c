// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// Stage 3: Reasoner/Observer ReAct loop over a detailed caption, then
// conversion of the trajectory into a tagged chain of thought.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "forge/caption.hpp"
#include "forge/error.hpp"
#include "forge/gateway.hpp"
#include "forge/prompts.hpp"
#include "forge/qa.hpp"
#include "forge/reward.hpp"

namespace forge {

enum class ActionKind { SegmentRetrieval, SegmentQuery, FinalAnswer };

inline std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::SegmentRetrieval: return "segment_retrieval";
    case ActionKind::SegmentQuery: return "segment_query";
    case ActionKind::FinalAnswer: return "final_answer";
  }
  return "final_answer";
}

inline std::optional<ActionKind> parse_action_kind(std::string_view s) {
  if (s == "segment_retrieval") return ActionKind::SegmentRetrieval;
  if (s == "segment_query") return ActionKind::SegmentQuery;
  if (s == "final_answer") return ActionKind::FinalAnswer;
  return std::nullopt;
}

struct Action {
  ActionKind kind = ActionKind::FinalAnswer;
  std::string text;        // query or answer
  double timestamp = 0.0;  // SegmentQuery only

  static Action retrieval(std::string q) { return {ActionKind::SegmentRetrieval, std::move(q), 0}; }
  static Action query(double t) { return {ActionKind::SegmentQuery, {}, t}; }
  static Action final_answer(std::string a) { return {ActionKind::FinalAnswer, std::move(a), 0}; }

  /// The argument as written in directives and tags.
  std::string arg() const {
    return kind == ActionKind::SegmentQuery ? text::format_clock(timestamp) : text;
  }

  friend bool operator==(const Action& a, const Action& b) {
    return a.kind == b.kind && a.arg() == b.arg();
  }
};

inline std::string escape_arg(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

/// `segment_query("01:12")`: the form used in directives, <action> tags and
/// everywhere an action is compared.
inline std::string render_action(const Action& a) {
  return std::string(to_string(a.kind)) + "(\"" + escape_arg(a.arg()) + "\")";
}

struct Step {
  std::string thought;
  Action action;
  std::optional<std::string> observation;
};

enum class Termination { Answered, Exhausted, Malformed };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Answered: return "answered";
    case Termination::Exhausted: return "exhausted";
    case Termination::Malformed: return "malformed";
  }
  return "malformed";
}

struct Trajectory {
  std::string question_id;
  std::vector<Step> steps;
  Termination termination = Termination::Malformed;
  std::optional<std::string> final_answer;
};

struct CoTTrace {
  std::string question_id;
  std::string text;
};

// ---------------------------------------------------------------------------
// Reasoner

struct ReasonerTurn {
  std::string thought;
  Action action;
};

/// Exactly one `ACTION name("arg")` directive; the thought is the text before it.
inline ReasonerTurn parse_directive(std::string_view response) {
  static const std::regex kDirective(
      R"re(ACTION[ \t]+(segment_retrieval|segment_query|final_answer)\("((?:[^"\\]|\\.)*)"\))re");
  std::string body(response);
  auto begin = std::sregex_iterator(body.begin(), body.end(), kDirective);
  auto end = std::sregex_iterator();
  auto count = std::distance(begin, end);
  if (count != 1)
    throw Error(ErrorCode::DirectiveUnparseable,
                std::to_string(count) + " ACTION directives in reasoner reply");
  const auto& m = *begin;
  auto kind = *parse_action_kind(m[1].str());
  std::string arg;
  auto raw = m[2].str();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 1 < raw.size()) ++i;
    arg.push_back(raw[i]);
  }
  arg = text::trim(arg);
  ReasonerTurn turn;
  turn.thought = text::trim(std::string_view(body).substr(0, static_cast<std::size_t>(m.position(0))));
  if (arg.empty()) throw Error(ErrorCode::DirectiveUnparseable, "empty action argument");
  if (kind == ActionKind::SegmentQuery) {
    auto t = parse_clock(arg);
    if (!t) {
      char* stop = nullptr;
      double v = std::strtod(arg.c_str(), &stop);
      if (stop == arg.c_str() || *stop != '\0' || !(v >= 0) || !std::isfinite(v))
        throw Error(ErrorCode::DirectiveUnparseable, "bad segment_query timestamp '" + arg + "'");
      t = v;
    }
    turn.action = Action::query(*t);
  } else {
    turn.action = {kind, arg, 0};
  }
  return turn;
}

inline std::string render_history(const std::vector<Step>& steps) {
  if (steps.empty()) return "";
  std::string out = "\n\nPrevious steps:";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    out += "\nStep " + std::to_string(i + 1) + ":";
    if (!s.thought.empty()) out += "\nThought: " + s.thought;
    out += "\nAction: " + render_action(s.action);
    if (s.observation) out += "\nObservation: " + *s.observation;
  }
  return out;
}

inline ChatRequest reasoner_request(const QARecord& question, const std::vector<Step>& history,
                                    std::optional<std::int64_t> seed) {
  std::string answer_format =
      question.form == QAForm::MultipleChoice
          ? " For this multiple-choice question the final answer is the option letter only."
          : "";
  auto prompt = text::render_template(prompts::kReasoner,
                                      {{"answer_format", answer_format},
                                       {"question", render_question(question)},
                                       {"history", render_history(history)}});
  auto req = make_request({RoleKind::Reasoner, 0}, std::move(prompt));
  req.sampling.seed = seed;
  return req;
}

/// One Reasoner turn. Throws DirectiveUnparseable when the reply does not
/// hold exactly one directive; `reask` sends the reminder variant.
inline ReasonerTurn reason_step(Gateway& gateway, const QARecord& question,
                                const std::vector<Step>& history, bool reask = false,
                                std::optional<std::int64_t> seed = std::nullopt) {
  auto req = reasoner_request(question, history, seed);
  if (reask) req = with_reminder(std::move(req), prompts::kReasonerReminder);
  return parse_directive(gateway.chat(req).text);
}

// ---------------------------------------------------------------------------
// Observer

enum class ObserverMode { Deterministic, ModelBacked };

inline constexpr double kQueryWindowS = 15.0;

inline std::set<std::string> lower_tokens(std::string_view s) {
  auto toks = text::split_whitespace(text::to_lower(s));
  return {toks.begin(), toks.end()};
}

inline std::string render_event(const TimedEvent& e) {
  return "at " + text::format_clock(e.time) + ": " + e.text;
}

/// Offline observer: segment_query returns every event within the window of
/// the timestamp; segment_retrieval returns the event with the highest share
/// of query tokens (earliest on ties). Pure in (action, caption).
inline std::string observe_deterministic(const Action& action, const DetailedCaption& caption) {
  if (action.kind == ActionKind::SegmentQuery) {
    std::string out;
    for (const auto& e : caption.events) {
      if (std::abs(e.time - action.timestamp) <= kQueryWindowS) {
        if (!out.empty()) out += '\n';
        out += render_event(e);
      }
    }
    return out.empty() ? "no event near " + text::format_clock(action.timestamp) : out;
  }
  auto query = lower_tokens(action.text);
  const TimedEvent* best = nullptr;
  double best_score = 0.0;
  for (const auto& e : caption.events) {
    auto tokens = lower_tokens(e.text);
    std::size_t shared = 0;
    for (const auto& t : query) shared += tokens.count(t);
    double score = query.empty() ? 0.0 : static_cast<double>(shared) / static_cast<double>(query.size());
    if (score > best_score) {
      best_score = score;
      best = &e;
    }
  }
  if (!best) return "no event matching \"" + action.text + "\"";
  return render_event(*best);
}

inline std::string execute_action(Gateway& gateway, const Action& action,
                                  const DetailedCaption& caption, ObserverMode mode) {
  if (action.kind == ActionKind::FinalAnswer)
    throw Error(ErrorCode::InvalidArgument, "final_answer is not executable");
  if (mode == ObserverMode::Deterministic) return observe_deterministic(action, caption);
  auto req = make_request({RoleKind::Observer, 0},
                          text::render_template(prompts::kObserver,
                                                {{"caption", serialize_caption(caption)},
                                                 {"action", render_action(action)}}));
  auto obs = text::trim(gateway.chat(req).text);
  return obs.empty() ? "nothing observed" : obs;
}

// ---------------------------------------------------------------------------
// Loop

struct LoopOptions {
  int max_steps = 11;
  ObserverMode observer = ObserverMode::Deterministic;
  std::optional<std::int64_t> seed;
};

/// Alternates Reasoner and Observer until a final answer (Answered), the step
/// budget or a repeated action (Exhausted), or a directive that stays
/// unparseable after one re-ask (Malformed).
inline Trajectory run_react_loop(Gateway& gateway, const QARecord& question,
                                 const DetailedCaption& caption, const LoopOptions& options = {}) {
  if (options.max_steps < 1) throw Error(ErrorCode::InvalidArgument, "max_steps must be >= 1");
  Trajectory traj;
  traj.question_id = question.id;
  int executed = 0;
  for (;;) {
    ReasonerTurn turn;
    try {
      turn = reason_step(gateway, question, traj.steps, false, options.seed);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DirectiveUnparseable) throw;
      try {
        turn = reason_step(gateway, question, traj.steps, true, options.seed);
      } catch (const Error& e2) {
        if (e2.code() != ErrorCode::DirectiveUnparseable) throw;
        traj.termination = Termination::Malformed;
        return traj;
      }
    }
    if (turn.action.kind == ActionKind::FinalAnswer) {
      traj.final_answer = turn.action.text;
      traj.steps.push_back({std::move(turn.thought), std::move(turn.action), std::nullopt});
      traj.termination = Termination::Answered;
      return traj;
    }
    if ((!traj.steps.empty() && traj.steps.back().action == turn.action) ||
        executed >= options.max_steps) {
      traj.termination = Termination::Exhausted;
      return traj;
    }
    auto obs = execute_action(gateway, turn.action, caption, options.observer);
    traj.steps.push_back({std::move(turn.thought), std::move(turn.action), std::move(obs)});
    ++executed;
  }
}

/// (action, observation) pairs in the rendered form the converter must keep.
inline std::vector<ActionObservation> trajectory_pairs(const Trajectory& traj) {
  std::vector<ActionObservation> out;
  for (const auto& s : traj.steps)
    if (s.observation) out.push_back({render_action(s.action), *s.observation});
  return out;
}

// ---------------------------------------------------------------------------
// Conversion

inline std::string render_trajectory(const Trajectory& traj) {
  std::string out;
  for (const auto& s : traj.steps) {
    if (!out.empty()) out += '\n';
    if (!s.thought.empty()) out += "Thought: " + s.thought + "\n";
    if (s.action.kind == ActionKind::FinalAnswer) {
      out += "Final answer: " + s.action.text;
    } else {
      out += "Action: " + render_action(s.action) + "\nObservation: " + s.observation.value_or("");
    }
  }
  return out;
}

/// Empty when `text` is a faithful rendering of the trajectory; otherwise why not.
inline std::optional<std::string> check_conversion(Gateway& gateway, std::string_view cot,
                                                   const Trajectory& traj,
                                                   const QARecord& question) {
  if (format_reward(cot) != 1) return "tag grammar violated";
  auto parsed = parse_trace(cot);
  auto expected = trajectory_pairs(traj);
  if (parsed.pairs.size() != expected.size())
    return "expected " + std::to_string(expected.size()) + " action/observation pairs, got " +
           std::to_string(parsed.pairs.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (text::collapse_whitespace(parsed.pairs[i].action) !=
            text::collapse_whitespace(expected[i].action) ||
        text::collapse_whitespace(parsed.pairs[i].observation) !=
            text::collapse_whitespace(expected[i].observation))
      return "pair " + std::to_string(i + 1) + " differs from the trajectory";
  }
  auto got = text::collapse_whitespace(*parsed.answer);
  auto want = text::collapse_whitespace(*traj.final_answer);
  if (got != want && judge_consistency(gateway, render_question(question), got, want) != 1)
    return "answer differs from the trajectory's final answer";
  return std::nullopt;
}

/// Tagged chain of thought for an Answered trajectory. With `gt_check`, a
/// trajectory whose final answer the judge finds inconsistent with the
/// reference answer yields nothing. One regeneration on an invalid rendering.
inline std::optional<CoTTrace> convert_trajectory(Gateway& gateway, const Trajectory& traj,
                                                  const QARecord& question, bool gt_check = true,
                                                  std::optional<std::int64_t> seed = std::nullopt) {
  if (traj.termination != Termination::Answered || !traj.final_answer)
    throw Error(ErrorCode::InvalidArgument, "only answered trajectories can be converted");
  if (gt_check &&
      judge_consistency(gateway, render_question(question), *traj.final_answer, question.answer) != 1)
    return std::nullopt;
  auto req = make_request({RoleKind::Convert, 0},
                          text::render_template(prompts::kConvert,
                                                {{"question", render_question(question)},
                                                 {"trajectory", render_trajectory(traj)}}));
  req.sampling.seed = seed;
  auto cot = text::trim(gateway.chat(req).text);
  auto problem = check_conversion(gateway, cot, traj, question);
  if (problem) {
    cot = text::trim(gateway.chat(with_reminder(req, prompts::kConvertReminder)).text);
    problem = check_conversion(gateway, cot, traj, question);
    if (problem) throw Error(ErrorCode::ConversionInvalid, traj.question_id + ": " + *problem);
  }
  return CoTTrace{traj.question_id, std::move(cot)};
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"thought", s.thought},
                     {"action", {{"kind", to_string(s.action.kind)}, {"arg", s.action.arg()}}},
                     {"observation", s.observation ? json(*s.observation) : json(nullptr)}});
  }
  return {{"question_id", t.question_id},
          {"steps", std::move(steps)},
          {"termination", to_string(t.termination)},
          {"final_answer", t.final_answer ? json(*t.final_answer) : json(nullptr)}};
}

inline Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.question_id = j.at("question_id").get<std::string>();
  for (const auto& s : j.at("steps")) {
    Step step;
    step.thought = s.at("thought").get<std::string>();
    auto kind_name = s.at("action").at("kind").get<std::string>();
    auto kind = parse_action_kind(kind_name);
    if (!kind) throw Error(ErrorCode::SchemaViolation, "unknown action kind '" + kind_name + "'");
    auto arg = s.at("action").at("arg").get<std::string>();
    if (*kind == ActionKind::SegmentQuery) {
      auto ts = parse_clock(arg);
      if (!ts) throw Error(ErrorCode::SchemaViolation, "bad segment_query arg '" + arg + "'");
      step.action = Action::query(*ts);
    } else {
      step.action = {*kind, arg, 0};
    }
    if (s.contains("observation") && s["observation"].is_string())
      step.observation = s["observation"].get<std::string>();
    t.steps.push_back(std::move(step));
  }
  auto term = j.at("termination").get<std::string>();
  if (term == "answered") t.termination = Termination::Answered;
  else if (term == "exhausted") t.termination = Termination::Exhausted;
  else if (term == "malformed") t.termination = Termination::Malformed;
  else throw Error(ErrorCode::SchemaViolation, "unknown termination '" + term + "'");
  if (j.contains("final_answer") && j["final_answer"].is_string())
    t.final_answer = j["final_answer"].get<std::string>();
  return t;
}

inline json to_json(const CoTTrace& c) { return {{"question_id", c.question_id}, {"text", c.text}}; }

inline CoTTrace cot_from_json(const json& j) {
  return {j.at("question_id").get<std::string>(), j.at("text").get<std::string>()};
}

}  // namespace forge
