// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// Stage drivers: load inputs, fan items out over a worker pool, commit
// results in input order, log one structured line per item.

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "forge/cot.hpp"
#include "forge/store.hpp"
#include "forge/thread_pool.hpp"

namespace forge {

using LogSink = std::function<void(const json&)>;

inline LogSink stderr_log() {
  return [](const json& line) { std::cerr << line.dump() << '\n'; };
}

struct StageSummary {
  Stage stage = Stage::Caption;
  std::size_t items = 0;
  std::size_t resumed = 0;  // skipped as already completed
  std::size_t failed = 0;
  std::map<std::string, std::size_t> outcomes;

  std::string describe() const {
    std::ostringstream os;
    os << to_string(stage) << ": " << items << " items";
    for (const auto& [name, n] : outcomes) os << ", " << n << ' ' << name;
    if (resumed) os << ", " << resumed << " already done";
    return os.str();
  }
};

struct StageOptions {
  int workers = 4;
  std::optional<std::int64_t> seed;
  bool resume = false;
  std::string config_digest;
  LogSink log = stderr_log();
};

namespace detail {

struct ItemResult {
  std::string outcome;
  std::vector<std::vector<json>> records;
  double latency_ms = 0;
};

/// Shared driver: `work(i)` produces an item's records; failures are logged
/// and left uncommitted so a resumed run retries them.
template <class Work>
StageSummary run_items(Stage stage, const std::vector<std::string>& ids, StageWriter& writer,
                       const StageOptions& options, Work work) {
  StageSummary summary;
  summary.stage = stage;
  summary.items = ids.size();
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (writer.done(ids[i])) ++summary.resumed;
    else pending.push_back(i);
  }
  parallel_for_ordered(
      pending.size(), options.workers,
      [&](std::size_t k) {
        auto t0 = std::chrono::steady_clock::now();
        ItemResult r = work(pending[k]);
        r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                           .count();
        return r;
      },
      [&](std::size_t k, std::optional<ItemResult> result, std::exception_ptr err) {
        const auto& id = ids[pending[k]];
        json line = {{"stage", to_string(stage)}, {"id", id}};
        if (result) {
          writer.commit(id, result->records);
          line["outcome"] = result->outcome;
          line["latency_ms"] = std::llround(result->latency_ms);
          ++summary.outcomes[result->outcome];
        } else {
          std::string what = "unknown error";
          try {
            std::rethrow_exception(err);
          } catch (const std::exception& e) {
            what = e.what();
          } catch (...) {
          }
          line["outcome"] = "failed";
          line["error"] = what;
          ++summary.failed;
          ++summary.outcomes["failed"];
        }
        if (options.log) options.log(line);
      });
  return summary;
}

inline std::map<std::string, DetailedCaption> captions_by_video(const std::filesystem::path& path) {
  std::map<std::string, DetailedCaption> out;
  for (const auto& j : load_records(path, RecordKind::Caption)) {
    auto c = caption_from_json(j);
    out.emplace(c.video_id, std::move(c));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Caption

inline StageSummary run_caption_stage(Gateway& gateway, const std::filesystem::path& manifest,
                                      const std::filesystem::path& out, const StageOptions& options) {
  std::vector<VideoRef> videos;
  std::vector<std::string> ids;
  for (const auto& j : load_records(manifest, RecordKind::Video)) {
    videos.push_back(video_from_json(j));
    ids.push_back(videos.back().id);
  }
  StageWriter writer(Stage::Caption, {out}, options.config_digest, options.resume);
  return detail::run_items(Stage::Caption, ids, writer, options, [&](std::size_t i) {
    auto caption = caption_video(gateway, videos[i], 1, options.seed);
    return detail::ItemResult{"ok", {{to_json(caption)}}};
  });
}

// ---------------------------------------------------------------------------
// QA

struct QAStagePaths {
  std::filesystem::path qa;
  std::filesystem::path summaries;
  std::filesystem::path rejected;

  /// summaries.jsonl and qa_rejected.jsonl next to the QA output.
  static QAStagePaths beside(const std::filesystem::path& qa) {
    auto dir = qa.parent_path();
    return {qa, dir / "summaries.jsonl", dir / "qa_rejected.jsonl"};
  }
};

struct QAStageOptions {
  double theta_text = 1.0;
  double theta_sum = 1.0;
  int quota_per_type = 3;
};

/// Per-pair problems that drop the pair instead of failing the video.
inline bool is_pair_rejection(ErrorCode code) {
  return code == ErrorCode::VerifierUnparseable || code == ErrorCode::RewriteUnparseable ||
         code == ErrorCode::AmbiguousOptions || code == ErrorCode::JudgeUnparseable;
}

inline json rejected_json(const QARecord& qa, const std::string& reason) {
  auto j = to_json(qa);
  j["reject_reason"] = reason;
  return j;
}

inline std::string cascade_reject_reason(const FilterOutcome& f) {
  if (f.f1.verdict != Verdict::Pass) return "f1 " + std::string(to_string(f.f1.verdict));
  if (f.f2.verdict != Verdict::Pass) return "f2 " + std::string(to_string(f.f2.verdict));
  return "f3 " + std::string(to_string(f.f3.verdict));
}

/// Summary, generation, cascade and rewriting for every caption. Passing
/// pairs become an open-ended and a multiple-choice record in `paths.qa`;
/// everything dropped goes to `paths.rejected` with a reason.
inline StageSummary run_qa_stage(Gateway& gateway, const std::filesystem::path& captions_path,
                                 const QAStagePaths& paths, const QAStageOptions& qa_options,
                                 const StageOptions& options) {
  std::vector<DetailedCaption> captions;
  std::vector<std::string> ids;
  for (const auto& j : load_records(captions_path, RecordKind::Caption)) {
    captions.push_back(caption_from_json(j));
    ids.push_back(captions.back().video_id);
  }
  auto quota = uniform_quota(qa_options.quota_per_type);
  StageWriter writer(Stage::QA, {paths.qa, paths.summaries, paths.rejected}, options.config_digest,
                     options.resume);
  return detail::run_items(Stage::QA, ids, writer, options, [&](std::size_t i) {
    const auto& caption = captions[i];
    auto summary = summarize(gateway, caption, options.seed);
    auto pairs = generate_qa(gateway, caption, summary, quota, options.seed);
    std::vector<json> kept;
    std::vector<json> rejected;
    for (auto& qa : pairs) {
      try {
        run_cascade(gateway, qa, caption, summary, qa_options.theta_text, qa_options.theta_sum);
      } catch (const Error& e) {
        if (!is_pair_rejection(e.code())) throw;
        rejected.push_back(rejected_json(qa, e.what()));
        continue;
      }
      if (!qa.verdicts.passed_all) {
        rejected.push_back(rejected_json(qa, cascade_reject_reason(qa.verdicts)));
        continue;
      }
      try {
        auto mc = rewrite_multiple_choice(gateway, qa, options.seed.value_or(0));
        kept.push_back(to_json(qa));
        kept.push_back(to_json(mc));
      } catch (const Error& e) {
        if (!is_pair_rejection(e.code())) throw;
        rejected.push_back(rejected_json(qa, e.what()));
      }
    }
    return detail::ItemResult{"ok", {std::move(kept), {to_json(summary)}, std::move(rejected)}};
  });
}

// ---------------------------------------------------------------------------
// CoT

struct CoTStagePaths {
  std::filesystem::path cot;
  std::filesystem::path trajectories;

  /// trajectories.jsonl next to the CoT output.
  static CoTStagePaths beside(const std::filesystem::path& cot) {
    return {cot, cot.parent_path() / "trajectories.jsonl"};
  }
};

struct CoTStageOptions {
  int max_steps = 11;
  ObserverMode observer = ObserverMode::Deterministic;
  bool gt_check = true;
};

/// One trajectory per QA record (both forms); answered trajectories that
/// survive the answer check and convert cleanly also yield a CoT record.
/// Item outcomes: converted, gt_mismatch, conversion_invalid, exhausted, malformed.
inline StageSummary run_cot_stage(Gateway& gateway, const std::filesystem::path& qa_path,
                                  const std::filesystem::path& captions_path,
                                  const CoTStagePaths& paths, const CoTStageOptions& cot_options,
                                  const StageOptions& options) {
  auto captions = detail::captions_by_video(captions_path);
  std::vector<QARecord> questions;
  std::vector<std::string> ids;
  for (const auto& j : load_records(qa_path, RecordKind::QA)) {
    questions.push_back(qa_from_json(j));
    ids.push_back(questions.back().id);
  }
  StageWriter writer(Stage::CoT, {paths.cot, paths.trajectories}, options.config_digest,
                     options.resume);
  LoopOptions loop{cot_options.max_steps, cot_options.observer, options.seed};
  return detail::run_items(Stage::CoT, ids, writer, options, [&](std::size_t i) {
    const auto& qa = questions[i];
    auto it = captions.find(qa.video_id);
    if (it == captions.end()) throw Error(ErrorCode::DanglingReference, "video_id " + qa.video_id);
    auto traj = run_react_loop(gateway, qa, it->second, loop);
    detail::ItemResult r;
    r.records = {{}, {to_json(traj)}};
    if (traj.termination != Termination::Answered) {
      r.outcome = std::string(to_string(traj.termination));
      return r;
    }
    try {
      auto cot = convert_trajectory(gateway, traj, qa, cot_options.gt_check, options.seed);
      if (!cot) {
        r.outcome = "gt_mismatch";
        return r;
      }
      r.records[0].push_back(to_json(*cot));
      r.outcome = "converted";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConversionInvalid) throw;
      r.outcome = "conversion_invalid";
    }
    return r;
  });
}

// ---------------------------------------------------------------------------
// Score

/// Reads samples leniently: a line that is not a valid sample becomes a
/// scored record carrying only an error.
inline StageSummary run_score_stage(Gateway& gateway, const std::filesystem::path& samples_path,
                                    const std::filesystem::path& out, const ScoreOptions& score_options,
                                    const StageOptions& options) {
  std::ifstream in(samples_path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + samples_path.string());
  struct Entry {
    std::string id;
    std::optional<RewardSample> sample;
    std::string problem;
  };
  std::vector<Entry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim_view(line).empty()) continue;
    Entry e;
    e.id = "line-" + std::to_string(line_no);
    try {
      auto j = json::parse(line);
      if (j.is_object() && j.contains("id") && j["id"].is_string()) e.id = j["id"].get<std::string>();
      validate_record(j, RecordKind::Sample, line_no);
      e.sample = sample_from_json(j);
    } catch (const std::exception& ex) {
      e.problem = std::string("malformed sample: ") + ex.what();
    }
    entries.push_back(std::move(e));
  }

  StageSummary summary;
  summary.stage = Stage::Score;
  summary.items = entries.size();
  auto results = parallel_map(entries.size(), options.workers, [&](std::size_t i) {
    auto t0 = std::chrono::steady_clock::now();
    RewardBreakdown b;
    if (entries[i].sample) b = score(gateway, *entries[i].sample, score_options);
    else b.error = entries[i].problem;
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return std::make_pair(b, ms);
  });
  std::vector<json> records;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [b, ms] = results[i];
    records.push_back(to_json(b, entries[i].id));
    json log = {{"stage", "score"}, {"id", entries[i].id}, {"latency_ms", std::llround(ms)}};
    if (b.error) {
      log["outcome"] = "error";
      log["error"] = *b.error;
      ++summary.failed;
      ++summary.outcomes["error"];
    } else {
      log["outcome"] = "scored";
      ++summary.outcomes["scored"];
    }
    if (options.log) options.log(log);
  }
  write_records(out, records);
  return summary;
}

}  // namespace forge
