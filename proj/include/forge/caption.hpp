// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// Stage 1: video -> segments -> per-segment timestamped descriptions ->
// absolute timestamps -> one detailed caption.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "forge/error.hpp"
#include "forge/gateway.hpp"
#include "forge/prompts.hpp"
#include "forge/text.hpp"
#include "forge/thread_pool.hpp"

namespace forge {

struct VideoRef {
  std::string id;
  std::string media;
  double duration_s = 0;
  std::string source;
};

struct Segment {
  int index = 1;
  double start = 0;
  double end = 0;
  std::string synopsis;
};

struct TimedEvent {
  double time = 0;
  std::string text;

  friend bool operator==(const TimedEvent&, const TimedEvent&) = default;
};

struct DetailedCaption {
  std::string video_id;
  std::vector<TimedEvent> events;
};

// Boundaries of adjacent segments (and the video ends) closer than this are
// snapped together; farther apart is a coverage gap.
inline constexpr double kBoundarySnapS = 2.0;

// ---------------------------------------------------------------------------
// Timed line grammar

enum class TimedLineMode { Range, Point };

struct TimedLine {
  double start = 0;
  std::optional<double> end;  // set in Range mode
  std::string text;
  std::size_t line = 0;  // 1-based source line
};

namespace detail {

inline std::optional<std::int64_t> parse_uint(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) return std::nullopt;
  return v;
}

}  // namespace detail

/// "MM:SS" (minutes unbounded) or "HH:MM:SS" to seconds.
inline std::optional<double> parse_clock(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    auto colon = s.find(':', start);
    parts.push_back(s.substr(start, colon == std::string_view::npos ? colon : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.size() != 2 && parts.size() != 3) return std::nullopt;
  std::vector<std::int64_t> v;
  for (auto p : parts) {
    auto n = detail::parse_uint(p);
    if (!n) return std::nullopt;
    v.push_back(*n);
  }
  if (v.back() >= 60 || parts.back().size() != 2) return std::nullopt;
  if (parts.size() == 3) {
    if (v[1] >= 60 || parts[1].size() != 2) return std::nullopt;
    return static_cast<double>(v[0] * 3600 + v[1] * 60 + v[2]);
  }
  return static_cast<double>(v[0] * 60 + v[1]);
}

/// Trailing whitespace stripped, internal runs collapsed.
inline std::string sanitize_event_text(std::string_view s) { return text::collapse_whitespace(s); }

/// Strict line grammar: `[MM:SS-MM:SS] text` (Range) or `[MM:SS] text`
/// (Point). Blank lines are skipped; anything else throws LineUnparseable.
inline std::vector<TimedLine> parse_timed_lines(std::string_view input, TimedLineMode mode) {
  std::vector<TimedLine> out;
  auto lines = text::split_lines(input);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line_no = i + 1;
    auto line = text::trim_view(lines[i]);
    if (line.empty()) continue;
    auto fail = [&](const char* why) {
      return Error(ErrorCode::LineUnparseable,
                   "line " + std::to_string(line_no) + ": " + why + ": '" + std::string(line) + "'",
                   line_no);
    };
    if (line.front() != '[') throw fail("expected '['");
    auto close = line.find(']');
    if (close == std::string_view::npos) throw fail("missing ']'");
    auto stamp = line.substr(1, close - 1);
    TimedLine parsed;
    parsed.line = line_no;
    if (mode == TimedLineMode::Range) {
      auto dash = stamp.find('-');
      if (dash == std::string_view::npos) throw fail("expected a time range");
      auto a = parse_clock(stamp.substr(0, dash));
      auto b = parse_clock(stamp.substr(dash + 1));
      if (!a || !b) throw fail("bad timestamp");
      parsed.start = *a;
      parsed.end = *b;
    } else {
      auto a = parse_clock(stamp);
      if (!a) throw fail("bad timestamp");
      parsed.start = *a;
    }
    auto rest = line.substr(close + 1);
    if (rest.empty() || !text::is_space(rest.front())) throw fail("expected text after timestamp");
    parsed.text = sanitize_event_text(rest);
    if (parsed.text.empty()) throw fail("empty text");
    out.push_back(std::move(parsed));
  }
  return out;
}

inline std::string render_timed_line(const TimedLine& line) {
  std::string stamp = text::format_clock(line.start);
  if (line.end) stamp += "-" + text::format_clock(*line.end);
  return "[" + stamp + "] " + line.text;
}

inline std::string render_timed_lines(const std::vector<TimedLine>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += render_timed_line(lines[i]);
  }
  return out;
}

/// Caption as "[MM:SS] text" lines, the form every downstream prompt sees.
inline std::string serialize_caption(const DetailedCaption& caption) {
  std::string out;
  for (std::size_t i = 0; i < caption.events.size(); ++i) {
    if (i) out += '\n';
    out += render_timed_line({caption.events[i].time, std::nullopt, caption.events[i].text, 0});
  }
  return out;
}

/// Seconds rendered without trailing zeros ("60", "60.5").
inline std::string format_seconds(double s) {
  if (s == std::floor(s)) return std::to_string(static_cast<std::int64_t>(s));
  std::ostringstream os;
  os.precision(3);
  os << std::fixed << s;
  auto str = os.str();
  while (str.back() == '0') str.pop_back();
  return str;
}

// ---------------------------------------------------------------------------
// Segmentation

/// Enforces contiguity over raw (start, end, text) ranges: start_1 = 0,
/// end_k = duration, end_i = start_{i+1}. Mismatches up to kBoundarySnapS are
/// snapped to floor of the midpoint; larger ones raise CoverageGap.
inline std::vector<Segment> normalize_segments(const std::vector<TimedLine>& ranges,
                                               double duration) {
  if (ranges.empty()) throw Error(ErrorCode::SegmentationUnparseable, "no segments");
  std::vector<Segment> segs;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto& r = ranges[i];
    segs.push_back({static_cast<int>(i + 1), r.start, r.end.value_or(r.start), r.text});
    if (i > 0 && r.start < ranges[i - 1].start)
      throw Error(ErrorCode::SegmentationUnparseable, "segments out of order", r.line);
  }
  auto gap_error = [](const std::string& where, double a, double b) {
    return Error(ErrorCode::CoverageGap, where + ": " + format_seconds(a) + "s vs " +
                                             format_seconds(b) + "s");
  };
  if (std::abs(segs.front().start) > kBoundarySnapS) throw gap_error("video start", 0, segs.front().start);
  segs.front().start = 0;
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    double a = segs[i].end;
    double b = segs[i + 1].start;
    if (std::abs(a - b) > kBoundarySnapS)
      throw gap_error("boundary after segment " + std::to_string(i + 1), a, b);
    double m = a == b ? a : std::floor((a + b) / 2.0);
    segs[i].end = m;
    segs[i + 1].start = m;
  }
  if (std::abs(segs.back().end - duration) > kBoundarySnapS)
    throw gap_error("video end", segs.back().end, duration);
  segs.back().end = duration;
  for (const auto& s : segs) {
    if (!(s.start < s.end))
      throw Error(ErrorCode::SegmentationUnparseable,
                  "segment " + std::to_string(s.index) + " is empty after normalization");
  }
  return segs;
}

inline void validate_video(const VideoRef& video) {
  if (video.id.empty()) throw Error(ErrorCode::InvalidArgument, "video id is empty");
  if (!(video.duration_s > 0))
    throw Error(ErrorCode::InvalidArgument, "video " + video.id + " has non-positive duration");
}

inline std::vector<Segment> segment_video(Gateway& gateway, const VideoRef& video,
                                          std::optional<std::int64_t> seed = std::nullopt) {
  validate_video(video);
  auto req = make_request({RoleKind::Seg, 0},
                          prompts::render_video_text_alignment(text::format_clock(video.duration_s)),
                          {video.media}, DetailHint::Low);
  req.sampling.seed = seed;
  auto response = gateway.chat(req).text;
  std::vector<TimedLine> ranges;
  try {
    ranges = parse_timed_lines(response, TimedLineMode::Range);
  } catch (const Error& e) {
    throw Error(ErrorCode::SegmentationUnparseable, e.what(), e.line());
  }
  return normalize_segments(ranges, video.duration_s);
}

// ---------------------------------------------------------------------------
// Description and realignment

struct RelativeEvent {
  std::string text;
  double relative_time = 0;

  friend bool operator==(const RelativeEvent&, const RelativeEvent&) = default;
};

/// Media Fragments URI for the segment's span.
inline std::string segment_media(const VideoRef& video, const Segment& seg) {
  return video.media + "#t=" + format_seconds(seg.start) + "," + format_seconds(seg.end);
}

inline std::vector<RelativeEvent> parse_segment_description(std::string_view response,
                                                            const Segment& segment) {
  std::vector<TimedLine> lines;
  try {
    lines = parse_timed_lines(response, TimedLineMode::Point);
  } catch (const Error& e) {
    throw Error(ErrorCode::DescriptionUnparseable, e.what(), e.line());
  }
  if (lines.empty())
    throw Error(ErrorCode::DescriptionUnparseable,
                "segment " + std::to_string(segment.index) + ": no events");
  double span = segment.end - segment.start;
  std::vector<RelativeEvent> out;
  for (auto& l : lines) {
    if (l.start < 0 || l.start > span)
      throw Error(ErrorCode::RelativeTimeOutOfRange,
                  "segment " + std::to_string(segment.index) + " lasts " + format_seconds(span) +
                      "s but event is at " + format_seconds(l.start) + "s",
                  l.line);
    out.push_back({std::move(l.text), l.start});
  }
  return out;
}

inline std::vector<RelativeEvent> describe_segment(Gateway& gateway, const Segment& segment,
                                                   const VideoRef& video,
                                                   std::optional<std::int64_t> seed = std::nullopt) {
  if (segment.start < 0 || segment.end > video.duration_s || !(segment.start < segment.end))
    throw Error(ErrorCode::InvalidArgument, "segment does not belong to video " + video.id);
  auto prompt = text::render_template(prompts::kDescribeSegment,
                                      {{"start", text::format_clock(segment.start)},
                                       {"end", text::format_clock(segment.end)},
                                       {"clip_duration", text::format_clock(segment.end - segment.start)}});
  auto req = make_request({RoleKind::Cap, 0}, std::move(prompt), {segment_media(video, segment)},
                          DetailHint::High);
  req.sampling.seed = seed;
  return parse_segment_description(gateway.chat(req).text, segment);
}

/// t = segment_start + relative_time for every event; order and text unchanged.
inline std::vector<TimedEvent> realign_timestamps(const std::vector<RelativeEvent>& events,
                                                  double segment_start) {
  std::vector<TimedEvent> out;
  out.reserve(events.size());
  for (const auto& e : events) {
    if (e.relative_time < 0)
      throw Error(ErrorCode::InvalidArgument, "negative relative timestamp");
    out.push_back({segment_start + e.relative_time, e.text});
  }
  return out;
}

/// Union of all segments' events, stably sorted by time.
inline DetailedCaption assemble_caption(const VideoRef& video,
                                        const std::vector<std::vector<TimedEvent>>& per_segment) {
  DetailedCaption caption{video.id, {}};
  for (const auto& seg : per_segment) {
    for (const auto& e : seg) {
      if (e.time < 0 || e.time > video.duration_s)
        throw Error(ErrorCode::InvalidArgument,
                    "event at " + format_seconds(e.time) + "s outside video " + video.id);
      caption.events.push_back(e);
    }
  }
  if (caption.events.empty()) throw Error(ErrorCode::EmptyCaption, "video " + video.id);
  std::stable_sort(caption.events.begin(), caption.events.end(),
                   [](const TimedEvent& a, const TimedEvent& b) { return a.time < b.time; });
  return caption;
}

/// The whole stage for one video. Segment descriptions run on up to `workers`
/// threads; assembly does not depend on completion order.
inline DetailedCaption caption_video(Gateway& gateway, const VideoRef& video, int workers = 1,
                                     std::optional<std::int64_t> seed = std::nullopt) {
  auto segments = segment_video(gateway, video, seed);
  auto per_segment = parallel_map(segments.size(), workers, [&](std::size_t i) {
    return realign_timestamps(describe_segment(gateway, segments[i], video, seed),
                              segments[i].start);
  });
  return assemble_caption(video, per_segment);
}

// ---------------------------------------------------------------------------
// JSON

inline json seconds_json(double s) {
  if (s == std::floor(s) && std::abs(s) < 9e15) return static_cast<std::int64_t>(s);
  return s;
}

inline json to_json(const VideoRef& v) {
  return {{"id", v.id}, {"media", v.media}, {"duration_s", seconds_json(v.duration_s)},
          {"source", v.source}};
}

inline VideoRef video_from_json(const json& j) {
  return {j.at("id").get<std::string>(), j.at("media").get<std::string>(),
          j.at("duration_s").get<double>(), j.value("source", std::string())};
}

inline json to_json(const DetailedCaption& c) {
  json events = json::array();
  for (const auto& e : c.events) events.push_back({{"t_s", seconds_json(e.time)}, {"text", e.text}});
  return {{"video_id", c.video_id}, {"events", std::move(events)}};
}

inline std::vector<TimedEvent> events_from_json(const json& arr) {
  std::vector<TimedEvent> out;
  for (const auto& e : arr) out.push_back({e.at("t_s").get<double>(), e.at("text").get<std::string>()});
  return out;
}

inline DetailedCaption caption_from_json(const json& j) {
  return {j.at("video_id").get<std::string>(), events_from_json(j.at("events"))};
}

}  // namespace forge
