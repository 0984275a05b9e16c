// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "forge/store.hpp"

namespace forge {

enum class SFTMode { CaptionAlign, NonThinking, Thinking };

inline std::string_view to_string(SFTMode m) {
  switch (m) {
    case SFTMode::CaptionAlign: return "caption_align";
    case SFTMode::NonThinking: return "non_thinking";
    case SFTMode::Thinking: return "thinking";
  }
  return "thinking";
}

struct SFTExample {
  SFTMode mode = SFTMode::Thinking;
  std::string prompt;
  std::string target;
  std::string media;
};

inline json to_json(const SFTExample& e) {
  return {{"mode", to_string(e.mode)}, {"prompt", e.prompt}, {"target", e.target}, {"media", e.media}};
}

/// Caption events as contiguous "[MM:SS-MM:SS] text" lines: each event runs
/// until the next one starts, the last until the end of the video.
inline std::string render_caption_target(const DetailedCaption& caption, double duration) {
  std::vector<TimedLine> lines;
  for (std::size_t i = 0; i < caption.events.size(); ++i) {
    double end = i + 1 < caption.events.size() ? caption.events[i + 1].time : duration;
    lines.push_back({caption.events[i].time, end, caption.events[i].text, 0});
  }
  return render_timed_lines(lines);
}

/// One CaptionAlign example per caption, one NonThinking example per QA
/// record (both forms), one Thinking example per chain of thought.
inline std::vector<SFTExample> build_sft_examples(const DataPaths& paths) {
  std::map<std::string, VideoRef> videos;
  for (const auto& j : load_optional(paths.videos, RecordKind::Video)) {
    auto v = video_from_json(j);
    videos.emplace(v.id, v);
  }
  auto video_for = [&](const std::string& id) -> const VideoRef& {
    auto it = videos.find(id);
    if (it == videos.end()) throw Error(ErrorCode::DanglingReference, "video_id " + id);
    return it->second;
  };

  std::vector<SFTExample> out;
  for (const auto& j : load_optional(paths.captions, RecordKind::Caption)) {
    auto c = caption_from_json(j);
    const auto& v = video_for(c.video_id);
    out.push_back({SFTMode::CaptionAlign,
                   prompts::render_video_text_alignment(text::format_clock(v.duration_s)),
                   render_caption_target(c, v.duration_s), v.media});
  }
  std::map<std::string, QARecord> questions;
  for (const auto& j : load_optional(paths.qa, RecordKind::QA)) {
    auto qa = qa_from_json(j);
    const auto& v = video_for(qa.video_id);
    out.push_back({SFTMode::NonThinking, prompts::render_non_thinking(render_question(qa)),
                   qa.answer, v.media});
    questions.emplace(qa.id, std::move(qa));
  }
  for (const auto& j : load_optional(paths.cot, RecordKind::CoT)) {
    auto c = cot_from_json(j);
    auto it = questions.find(c.question_id);
    if (it == questions.end()) throw Error(ErrorCode::DanglingReference, "question_id " + c.question_id);
    const auto& v = video_for(it->second.video_id);
    out.push_back({SFTMode::Thinking,
                   prompts::render_thinking(text::format_clock(v.duration_s), render_question(it->second)),
                   c.text, v.media});
  }
  return out;
}

inline std::size_t export_sft(const DataPaths& paths, const std::filesystem::path& out) {
  auto examples = build_sft_examples(paths);
  std::vector<json> records;
  records.reserve(examples.size());
  for (const auto& e : examples) records.push_back(to_json(e));
  write_records(out, records);
  return records.size();
}

}  // namespace forge
