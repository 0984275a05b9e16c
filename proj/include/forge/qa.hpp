// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// Stage 2: contrastive QA generation over (detailed caption, summary), the
// three-layer filter cascade, and multiple-choice rewriting.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "forge/caption.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/gateway.hpp"
#include "forge/prompts.hpp"
#include "forge/thread_pool.hpp"

namespace forge {

enum class QuestionType {
  EventLocalization,
  TemporalLocalization,
  Counting,
  CauseAndEffect,
  Reading,
  SpatialPerception,
  ObjectRecognition,
  StateChanges,
  NumericalReasoning,
  CounterfactualReasoning,
};

struct QuestionTypeInfo {
  QuestionType type;
  std::string_view name;     // wire name
  std::string_view display;  // human-readable name
  std::string_view definition;
};

inline constexpr std::array<QuestionTypeInfo, 10> kQuestionTypes = {{
    {QuestionType::EventLocalization, "EventLocalization", "Event Localization",
     "This task requires the LVLM to output the precise start and end times of a specific event "
     "in the video, based on a natural language query."},
    {QuestionType::TemporalLocalization, "TemporalLocalization", "Temporal Localization",
     "This task provides a timestamp or time interval from the video and requires the LVLM to "
     "describe what happened within that specific time."},
    {QuestionType::Counting, "Counting", "Counting",
     "This task requires the LVLM to calculate the frequency of events or actions and to perceive "
     "the number of occurrences of specific objects."},
    {QuestionType::CauseAndEffect, "CauseAndEffect", "Cause and Effect",
     "This task requires the LVLM to identify direct causal relationships between specific events "
     "in the video, meaning one event directly led to the occurrence of another."},
    {QuestionType::Reading, "Reading", "Reading (OCR)",
     "This task requires the LVLM to identify and understand textual information appearing in the "
     "video frame (e.g., signs, subtitles, screen displays, document content)."},
    {QuestionType::SpatialPerception, "SpatialPerception", "Spatial Perception",
     "This task requires the LVLM to understand the relative spatial positions, distances, and "
     "movement trajectories between objects, people, and their environment within the video."},
    {QuestionType::ObjectRecognition, "ObjectRecognition", "Object Recognition",
     "This task requires the LVLM to identify and name specific objects, people, or animals "
     "appearing in the video."},
    {QuestionType::StateChanges, "StateChanges", "State Changes",
     "This task requires the LVLM to identify temporal changes in the attributes, position, "
     "behavior, or emotions of specific objects or characters in the video."},
    {QuestionType::NumericalReasoning, "NumericalReasoning", "Numerical Reasoning",
     "This task requires the LVLM to perform all mathematical operations other than simple "
     "counting, including but not limited to comparison, calculating speed, estimating time, "
     "calculating proportions, etc."},
    {QuestionType::CounterfactualReasoning, "CounterfactualReasoning", "Counterfactual Reasoning",
     "This task requires the LVLM, given the video context, to hypothesize a scenario where a "
     "certain event did not occur or occurred differently, and then infer the likely objective, "
     "verifiable consequences. This does not involve subjective feelings or pure speculation but "
     "is based on physical laws, logic, or established patterns shown in the video."},
}};

inline std::string_view to_string(QuestionType t) {
  return kQuestionTypes[static_cast<std::size_t>(t)].name;
}

/// Accepts the wire name or the display name ("Cause and Effect", "Reading (OCR)", "Reading").
inline std::optional<QuestionType> parse_question_type(std::string_view s) {
  auto t = text::trim_view(s);
  for (const auto& info : kQuestionTypes) {
    if (t == info.name || t == info.display) return info.type;
  }
  return std::nullopt;
}

enum class QAForm { OpenEnded, MultipleChoice };

inline std::string_view to_string(QAForm f) {
  return f == QAForm::OpenEnded ? "open_ended" : "multiple_choice";
}

enum class Verdict { Pass, Fail, Skipped };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Skipped: return "skipped";
  }
  return "skipped";
}

inline Verdict parse_verdict(std::string_view s) {
  if (s == "pass") return Verdict::Pass;
  if (s == "fail") return Verdict::Fail;
  if (s == "skipped") return Verdict::Skipped;
  throw Error(ErrorCode::SchemaViolation, "unknown verdict '" + std::string(s) + "'");
}

struct StageVerdict {
  Verdict verdict = Verdict::Skipped;
  std::vector<int> probe_hits;
  std::string reason;  // why a stage ended Skipped, if it ran
};

struct FilterOutcome {
  StageVerdict f1;
  StageVerdict f2;
  StageVerdict f3;
  bool passed_all = false;
};

struct Option {
  std::string letter;
  std::string text;

  friend bool operator==(const Option&, const Option&) = default;
};

struct QARecord {
  std::string id;
  std::string video_id;
  QuestionType qtype = QuestionType::Counting;
  QAForm form = QAForm::OpenEnded;
  std::string question;
  std::string answer;
  std::vector<Option> options;  // MultipleChoice only
  FilterOutcome verdicts;
};

struct Summary {
  std::string video_id;
  std::string text;
};

using Quota = std::map<QuestionType, int>;

inline Quota uniform_quota(int per_type) {
  Quota q;
  for (const auto& info : kQuestionTypes) q[info.type] = per_type;
  return q;
}

inline constexpr std::string_view kOpenSuffix = "-oe";
inline constexpr std::string_view kChoiceSuffix = "-mc";

/// Shared stem of the open-ended and multiple-choice records of one pair.
inline std::string id_stem(std::string_view id) {
  if (id.size() > 3) {
    auto tail = id.substr(id.size() - 3);
    if (tail == kOpenSuffix || tail == kChoiceSuffix) return std::string(id.substr(0, id.size() - 3));
  }
  return std::string(id);
}

/// Question text as a model sees it: MC options follow on their own lines.
inline std::string render_question(const QARecord& qa) {
  std::string out = qa.question;
  for (const auto& o : qa.options) out += "\n" + o.letter + ". " + o.text;
  return out;
}

// ---------------------------------------------------------------------------
// Summary

inline Summary summarize(Gateway& gateway, const DetailedCaption& caption,
                         std::optional<std::int64_t> seed = std::nullopt) {
  if (caption.events.empty()) throw Error(ErrorCode::EmptyCaption, "video " + caption.video_id);
  auto serialized = serialize_caption(caption);
  auto req = make_request({RoleKind::Sum, 0},
                          text::render_template(prompts::kSummarize, {{"caption", serialized}}));
  req.sampling.seed = seed;
  auto summary = text::trim(gateway.chat(req).text);
  if (summary.empty()) throw Error(ErrorCode::EmptySummary, "video " + caption.video_id);
  if (summary.size() >= serialized.size())
    throw Error(ErrorCode::SummaryNotShorter,
                "video " + caption.video_id + ": summary is not shorter than the caption");
  return {caption.video_id, std::move(summary)};
}

// ---------------------------------------------------------------------------
// Generation

inline std::string render_type_definitions() {
  std::string out;
  for (const auto& info : kQuestionTypes) {
    if (!out.empty()) out += '\n';
    out += "- " + std::string(info.name) + ": " + std::string(info.definition);
  }
  return out;
}

inline std::string render_quotas(const Quota& quota) {
  std::string out;
  for (const auto& [type, n] : quota) {
    if (n <= 0) continue;
    if (!out.empty()) out += '\n';
    out += "- " + std::string(to_string(type)) + ": " + std::to_string(n);
  }
  return out;
}

inline std::string make_qa_id(const std::string& video_id, QuestionType type,
                              const std::string& question, const std::string& answer) {
  return content_id("qa-", video_id + "\n" + std::string(to_string(type)) + "\n" + question + "\n" +
                               answer) +
         std::string(kOpenSuffix);
}

/// Parses the generator's JSON array and applies quotas in emission order.
inline std::vector<QARecord> parse_generated_qa(std::string_view response,
                                                const std::string& video_id, const Quota& quota) {
  json arr;
  try {
    arr = json::parse(text::strip_code_fence(response));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::GenerationUnparseable, e.what());
  }
  if (!arr.is_array()) throw Error(ErrorCode::GenerationUnparseable, "expected a JSON array");
  std::map<QuestionType, int> taken;
  std::set<std::string> seen;
  std::vector<QARecord> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& item = arr[i];
    auto field = [&](const char* name) -> std::string {
      if (!item.is_object() || !item.contains(name) || !item[name].is_string())
        throw Error(ErrorCode::GenerationUnparseable,
                    "item " + std::to_string(i) + " lacks string field '" + name + "'");
      return text::trim(item[name].get<std::string>());
    };
    auto type_name = field("type");
    auto type = parse_question_type(type_name);
    if (!type)
      throw Error(ErrorCode::UnknownQuestionType,
                  "item " + std::to_string(i) + " has type '" + type_name + "'");
    QARecord qa;
    qa.video_id = video_id;
    qa.qtype = *type;
    qa.question = field("question");
    qa.answer = field("answer");
    if (qa.question.empty() || qa.answer.empty())
      throw Error(ErrorCode::GenerationUnparseable,
                  "item " + std::to_string(i) + " has an empty question or answer");
    auto it = quota.find(*type);
    int limit = it == quota.end() ? 0 : it->second;
    if (taken[*type] >= limit) continue;
    qa.id = make_qa_id(video_id, qa.qtype, qa.question, qa.answer);
    if (!seen.insert(qa.id).second) continue;
    ++taken[*type];
    out.push_back(std::move(qa));
  }
  return out;
}

inline std::vector<QARecord> generate_qa(Gateway& gateway, const DetailedCaption& caption,
                                         const Summary& summary, const Quota& quota,
                                         std::optional<std::int64_t> seed = std::nullopt) {
  if (caption.video_id != summary.video_id)
    throw Error(ErrorCode::InvalidArgument, "caption and summary belong to different videos");
  for (const auto& [type, n] : quota)
    if (n < 0) throw Error(ErrorCode::InvalidArgument, "negative quota");
  auto prompt = text::render_template(prompts::kGenerateQA,
                                      {{"type_definitions", render_type_definitions()},
                                       {"quotas", render_quotas(quota)},
                                       {"caption", serialize_caption(caption)},
                                       {"summary", summary.text}});
  auto req = make_request({RoleKind::QAGen, 0}, std::move(prompt));
  req.sampling.seed = seed;
  return parse_generated_qa(gateway.chat(req).text, caption.video_id, quota);
}

// ---------------------------------------------------------------------------
// Filters

/// Case-insensitive "true"/"false" prefix.
inline std::optional<bool> parse_verifier(std::string_view response) {
  auto t = text::trim_view(response);
  if (text::starts_with_ci(t, "true")) return true;
  if (text::starts_with_ci(t, "false")) return false;
  return std::nullopt;
}

/// Filter 1: the verifier must affirm the answer against the detailed caption.
inline Verdict verify_answer(Gateway& gateway, QARecord& qa, const DetailedCaption& caption) {
  if (qa.form != QAForm::OpenEnded)
    throw Error(ErrorCode::InvalidArgument, "verify_answer expects an open-ended record");
  auto req = make_request({RoleKind::Verify, 0},
                          text::render_template(prompts::kVerifyAnswer,
                                                {{"caption", serialize_caption(caption)},
                                                 {"question", qa.question},
                                                 {"answer", qa.answer}}));
  auto parsed = parse_verifier(gateway.chat(req).text);
  if (!parsed) {
    auto second = gateway.chat(with_reminder(req, prompts::kVerifyReminder)).text;
    parsed = parse_verifier(second);
    if (!parsed)
      throw Error(ErrorCode::VerifierUnparseable, "verifier replied '" + text::trim(second) + "'");
  }
  qa.verdicts.f1.verdict = *parsed ? Verdict::Pass : Verdict::Fail;
  return qa.verdicts.f1.verdict;
}

/// Filters 2 and 3. Every probe answers the question (after the summary, when
/// given); each answer is judged against the reference. Passes iff the mean
/// hit rate is strictly below `theta`. Gateway or judge failures leave the
/// stage Skipped with a reason.
inline StageVerdict bias_filter(Gateway& gateway, const QARecord& qa,
                                const std::optional<Summary>& context, double theta,
                                int probe_workers = 1) {
  int n = gateway.probe_count();
  if (n <= 0) throw Error(ErrorCode::InvalidArgument, "probe ensemble is empty");
  if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "theta outside (0,1]");
  StageVerdict out;
  try {
    out.probe_hits = parallel_map(static_cast<std::size_t>(n), probe_workers, [&](std::size_t i) {
      ChatRequest req;
      req.role = ModelRole::probe(static_cast<int>(i));
      req.sampling = default_sampling(RoleKind::Probe);
      if (context)
        req.messages.push_back(
            {Speaker::User,
             text::render_template(prompts::kProbeSummaryPreamble, {{"summary", context->text}}),
             {}});
      req.messages.push_back(
          {Speaker::User, text::render_template(prompts::kProbe, {{"question", qa.question}}), {}});
      auto answer = text::trim(gateway.chat(req).text);
      if (answer.empty()) return 0;
      return judge_consistency(gateway, qa.question, answer, qa.answer);
    });
  } catch (const Error& e) {
    out.verdict = Verdict::Skipped;
    out.probe_hits.clear();
    out.reason = e.what();
    return out;
  }
  int hits = 0;
  for (int h : out.probe_hits) hits += h;
  double mean = static_cast<double>(hits) / static_cast<double>(n);
  out.verdict = mean < theta ? Verdict::Pass : Verdict::Fail;
  return out;
}

/// F1 -> F2 -> F3, stopping at the first stage that does not pass.
inline FilterOutcome run_cascade(Gateway& gateway, QARecord& qa, const DetailedCaption& caption,
                                 const Summary& summary, double theta_text, double theta_sum,
                                 int probe_workers = 1) {
  qa.verdicts = {};
  verify_answer(gateway, qa, caption);
  if (qa.verdicts.f1.verdict == Verdict::Pass) {
    qa.verdicts.f2 = bias_filter(gateway, qa, std::nullopt, theta_text, probe_workers);
    if (qa.verdicts.f2.verdict == Verdict::Pass)
      qa.verdicts.f3 = bias_filter(gateway, qa, summary, theta_sum, probe_workers);
  }
  qa.verdicts.passed_all = qa.verdicts.f1.verdict == Verdict::Pass &&
                           qa.verdicts.f2.verdict == Verdict::Pass &&
                           qa.verdicts.f3.verdict == Verdict::Pass;
  return qa.verdicts;
}

// ---------------------------------------------------------------------------
// Multiple-choice rewriting

inline constexpr int kOptionCount = 4;

inline std::string option_letter(int i) { return std::string(1, static_cast<char>('A' + i)); }

struct RawChoices {
  std::vector<Option> options;
  std::string key;
};

inline RawChoices parse_rewrite(std::string_view response) {
  json j;
  try {
    j = json::parse(text::strip_code_fence(response));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::RewriteUnparseable, e.what());
  }
  if (!j.is_object() || !j.contains("options") || !j["options"].is_array() ||
      !j.contains("answer") || !j["answer"].is_string())
    throw Error(ErrorCode::RewriteUnparseable, "expected {options: [...], answer: letter}");
  RawChoices out;
  const auto& opts = j["options"];
  if (opts.size() != kOptionCount)
    throw Error(ErrorCode::RewriteUnparseable,
                "expected " + std::to_string(kOptionCount) + " options, got " +
                    std::to_string(opts.size()));
  for (std::size_t i = 0; i < opts.size(); ++i) {
    const auto& o = opts[i];
    if (!o.is_object() || !o.contains("letter") || !o["letter"].is_string() ||
        !o.contains("text") || !o["text"].is_string())
      throw Error(ErrorCode::RewriteUnparseable, "option " + std::to_string(i) + " malformed");
    Option opt{text::trim(o["letter"].get<std::string>()), text::trim(o["text"].get<std::string>())};
    if (opt.letter != option_letter(static_cast<int>(i)) || opt.text.empty())
      throw Error(ErrorCode::RewriteUnparseable,
                  "options must be lettered consecutively from A with non-empty text");
    out.options.push_back(std::move(opt));
  }
  out.key = text::trim(j["answer"].get<std::string>());
  bool known = false;
  for (const auto& o : out.options) known = known || o.letter == out.key;
  if (!known) throw Error(ErrorCode::RewriteUnparseable, "answer letter '" + out.key + "' unknown");
  return out;
}

/// Fisher-Yates over a SHA-256-seeded mt19937_64; portable across standard
/// libraries (no std::shuffle / uniform_int_distribution).
template <class T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

inline QARecord rewrite_multiple_choice(Gateway& gateway, const QARecord& qa, std::int64_t seed) {
  if (qa.form != QAForm::OpenEnded)
    throw Error(ErrorCode::InvalidArgument, "rewrite expects an open-ended record");
  if (!qa.verdicts.passed_all)
    throw Error(ErrorCode::InvalidArgument, "rewrite expects a record that passed all filters");
  auto req = make_request({RoleKind::Rewrite, 0},
                          text::render_template(prompts::kRewriteMultipleChoice,
                                                {{"question", qa.question}, {"answer", qa.answer}}));
  req.sampling.seed = seed;
  auto raw = parse_rewrite(gateway.chat(req).text);

  int equivalent = 0;
  std::string equivalent_letter;
  for (const auto& o : raw.options) {
    if (judge_consistency(gateway, qa.question, o.text, qa.answer) == 1) {
      ++equivalent;
      equivalent_letter = o.letter;
    }
  }
  if (equivalent != 1)
    throw Error(ErrorCode::AmbiguousOptions,
                std::to_string(equivalent) + " options match the reference answer");
  if (equivalent_letter != raw.key)
    throw Error(ErrorCode::AmbiguousOptions, "keyed option " + raw.key +
                                                 " differs from the matching option " +
                                                 equivalent_letter);

  auto stem = id_stem(qa.id);
  std::vector<std::size_t> order(raw.options.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  seeded_shuffle(order, digest_u64(std::to_string(seed) + ":" + stem));

  QARecord mc = qa;
  mc.id = stem + std::string(kChoiceSuffix);
  mc.form = QAForm::MultipleChoice;
  mc.options.clear();
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& src = raw.options[order[i]];
    auto letter = option_letter(static_cast<int>(i));
    if (src.letter == raw.key) mc.answer = letter;
    mc.options.push_back({letter, src.text});
  }
  return mc;
}

/// MC invariants that can be checked without a judge: consecutive letters from
/// A, answer is one of them. Open-ended records carry no options.
inline bool mc_shape_valid(const QARecord& qa) {
  if (qa.form == QAForm::OpenEnded) return qa.options.empty();
  if (qa.options.empty()) return false;
  int marked = 0;
  for (std::size_t i = 0; i < qa.options.size(); ++i) {
    if (qa.options[i].letter != option_letter(static_cast<int>(i))) return false;
    marked += qa.options[i].letter == qa.answer ? 1 : 0;
  }
  return marked == 1;
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const StageVerdict& v) {
  json j = {{"verdict", to_string(v.verdict)}, {"probe_hits", v.probe_hits}};
  if (!v.reason.empty()) j["reason"] = v.reason;
  return j;
}

inline StageVerdict stage_verdict_from_json(const json& j) {
  StageVerdict v;
  v.verdict = parse_verdict(j.at("verdict").get<std::string>());
  if (j.contains("probe_hits")) v.probe_hits = j["probe_hits"].get<std::vector<int>>();
  v.reason = j.value("reason", std::string());
  return v;
}

inline json to_json(const FilterOutcome& f) {
  json f1 = {{"verdict", to_string(f.f1.verdict)}};
  if (!f.f1.reason.empty()) f1["reason"] = f.f1.reason;
  return {{"f1", std::move(f1)}, {"f2", to_json(f.f2)}, {"f3", to_json(f.f3)},
          {"passed_all", f.passed_all}};
}

inline FilterOutcome filter_outcome_from_json(const json& j) {
  FilterOutcome f;
  f.f1 = stage_verdict_from_json(j.at("f1"));
  f.f2 = stage_verdict_from_json(j.at("f2"));
  f.f3 = stage_verdict_from_json(j.at("f3"));
  f.passed_all = j.at("passed_all").get<bool>();
  return f;
}

inline json to_json(const QARecord& qa) {
  json j = {{"id", qa.id},
            {"video_id", qa.video_id},
            {"type", to_string(qa.qtype)},
            {"form", to_string(qa.form)},
            {"question", qa.question},
            {"answer", qa.answer},
            {"verdicts", to_json(qa.verdicts)}};
  if (qa.form == QAForm::MultipleChoice) {
    json opts = json::array();
    for (const auto& o : qa.options) opts.push_back({{"letter", o.letter}, {"text", o.text}});
    j["options"] = std::move(opts);
  }
  return j;
}

inline QARecord qa_from_json(const json& j) {
  QARecord qa;
  qa.id = j.at("id").get<std::string>();
  qa.video_id = j.at("video_id").get<std::string>();
  auto type_name = j.at("type").get<std::string>();
  auto type = parse_question_type(type_name);
  if (!type) throw Error(ErrorCode::UnknownQuestionType, type_name);
  qa.qtype = *type;
  auto form = j.at("form").get<std::string>();
  if (form == "open_ended") qa.form = QAForm::OpenEnded;
  else if (form == "multiple_choice") qa.form = QAForm::MultipleChoice;
  else throw Error(ErrorCode::SchemaViolation, "unknown form '" + form + "'");
  qa.question = j.at("question").get<std::string>();
  qa.answer = j.at("answer").get<std::string>();
  if (j.contains("options"))
    for (const auto& o : j["options"])
      qa.options.push_back({o.at("letter").get<std::string>(), o.at("text").get<std::string>()});
  if (j.contains("verdicts")) qa.verdicts = filter_outcome_from_json(j["verdicts"]);
  return qa;
}

inline json to_json(const Summary& s) { return {{"video_id", s.video_id}, {"text", s.text}}; }

inline Summary summary_from_json(const json& j) {
  return {j.at("video_id").get<std::string>(), j.at("text").get<std::string>()};
}

}  // namespace forge
