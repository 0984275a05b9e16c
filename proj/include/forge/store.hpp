// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// JSONL persistence for every pipeline artifact, schema checks on load, and
// the resumable run state that sits next to each stage output.

#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "forge/caption.hpp"
#include "forge/cot.hpp"
#include "forge/error.hpp"
#include "forge/qa.hpp"
#include "forge/reward.hpp"

namespace forge {

enum class RecordKind { Video, Caption, Summary, QA, Trajectory, CoT, Sample, Scored, SFT };

inline std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::Video: return "video";
    case RecordKind::Caption: return "caption";
    case RecordKind::Summary: return "summary";
    case RecordKind::QA: return "qa";
    case RecordKind::Trajectory: return "trajectory";
    case RecordKind::CoT: return "cot";
    case RecordKind::Sample: return "sample";
    case RecordKind::Scored: return "scored";
    case RecordKind::SFT: return "sft";
  }
  return "record";
}

namespace detail {

enum class FieldType { String, Number, Array, Object, Boolean, StringOrNull };

inline bool field_ok(const json& j, FieldType t) {
  switch (t) {
    case FieldType::String: return j.is_string();
    case FieldType::Number: return j.is_number();
    case FieldType::Array: return j.is_array();
    case FieldType::Object: return j.is_object();
    case FieldType::Boolean: return j.is_boolean();
    case FieldType::StringOrNull: return j.is_string() || j.is_null();
  }
  return false;
}

struct FieldSpec {
  const char* name;
  FieldType type;
};

inline std::vector<FieldSpec> required_fields(RecordKind kind) {
  using F = FieldType;
  switch (kind) {
    case RecordKind::Video:
      return {{"id", F::String}, {"media", F::String}, {"duration_s", F::Number}, {"source", F::String}};
    case RecordKind::Caption: return {{"video_id", F::String}, {"events", F::Array}};
    case RecordKind::Summary: return {{"video_id", F::String}, {"text", F::String}};
    case RecordKind::QA:
      return {{"id", F::String},       {"video_id", F::String}, {"type", F::String},
              {"form", F::String},     {"question", F::String}, {"answer", F::String},
              {"verdicts", F::Object}};
    case RecordKind::Trajectory:
      return {{"question_id", F::String}, {"steps", F::Array}, {"termination", F::String},
              {"final_answer", F::StringOrNull}};
    case RecordKind::CoT: return {{"question_id", F::String}, {"text", F::String}};
    case RecordKind::Sample:
      return {{"id", F::String},        {"question", F::String},  {"response_text", F::String},
              {"gt_answer", F::String}, {"caption_events", F::Array}};
    case RecordKind::Scored:
      return {{"id", F::String},    {"r_acc", F::Number}, {"r_obs", F::Number},
              {"r_rea", F::Number}, {"r_fmt", F::Number}, {"r_total", F::Number}};
    case RecordKind::SFT:
      return {{"mode", F::String}, {"prompt", F::String}, {"target", F::String}, {"media", F::String}};
  }
  return {};
}

}  // namespace detail

/// Throws SchemaViolation(line) unless `j` has every required field with the
/// right type and decodes into its domain type.
inline void validate_record(const json& j, RecordKind kind, std::size_t line = 0) {
  auto fail = [&](const std::string& why) {
    return Error(ErrorCode::SchemaViolation,
                 std::string(to_string(kind)) + " record, line " + std::to_string(line) + ": " + why,
                 line);
  };
  if (!j.is_object()) throw fail("not a JSON object");
  for (const auto& f : detail::required_fields(kind)) {
    if (!j.contains(f.name)) throw fail(std::string("missing \"") + f.name + "\"");
    if (!detail::field_ok(j[f.name], f.type)) throw fail(std::string("bad type for \"") + f.name + "\"");
  }
  try {
    switch (kind) {
      case RecordKind::Video: {
        auto v = video_from_json(j);
        if (!(v.duration_s > 0)) throw fail("duration_s must be positive");
        break;
      }
      case RecordKind::Caption: (void)caption_from_json(j); break;
      case RecordKind::QA: {
        auto qa = qa_from_json(j);
        if (!mc_shape_valid(qa)) throw fail("options inconsistent with form/answer");
        break;
      }
      case RecordKind::Trajectory: (void)trajectory_from_json(j); break;
      case RecordKind::Sample: (void)events_from_json(j["caption_events"]); break;
      default: break;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaViolation && e.line() == line) throw;
    throw fail(e.what());
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
}

enum class LoadMode { Strict, Tolerant };

/// Reads a JSONL file. A final line that is both unterminated and
/// unparseable is a torn write: TornLine in strict mode, dropped with a
/// warning in tolerant mode. Any other bad line is a SchemaViolation.
inline std::vector<json> load_records(const std::filesystem::path& path, RecordKind kind,
                                      LoadMode mode = LoadMode::Strict,
                                      std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto content = buf.str();
  std::vector<json> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    bool terminated = nl != std::string::npos;
    auto line = std::string_view(content).substr(pos, terminated ? nl - pos : std::string::npos);
    pos = terminated ? nl + 1 : content.size();
    ++line_no;
    if (text::trim_view(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      if (!terminated) {
        auto msg = path.string() + ": torn final line " + std::to_string(line_no);
        if (mode == LoadMode::Strict) throw Error(ErrorCode::TornLine, msg, line_no);
        if (warnings) warnings->push_back(msg);
        else std::cerr << "warning: " << msg << " dropped\n";
        break;
      }
      throw Error(ErrorCode::SchemaViolation,
                  path.string() + ": line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    validate_record(j, kind, line_no);
    out.push_back(std::move(j));
  }
  return out;
}

/// Truncates an unterminated final line so later appends start clean.
inline void repair_torn_tail(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  auto content = buf.str();
  if (content.empty() || content.back() == '\n') return;
  auto nl = content.rfind('\n');
  std::filesystem::resize_file(path, nl == std::string::npos ? 0 : nl + 1);
}

namespace detail {

inline void write_all(int fd, const std::string& data, const std::string& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, "write " + path + ": " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace detail

/// Appends one line per record; each line goes out in a single write on an
/// O_APPEND descriptor.
inline void append_records(const std::filesystem::path& path, const std::vector<json>& records) {
  if (records.empty()) return;
  int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::Io, "open " + path.string() + ": " + std::strerror(errno));
  try {
    for (const auto& r : records) detail::write_all(fd, r.dump() + "\n", path.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

inline void write_records(const std::filesystem::path& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Run state

enum class Stage { Caption, QA, CoT, Score };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Caption: return "caption";
    case Stage::QA: return "qa";
    case Stage::CoT: return "cot";
    case Stage::Score: return "score";
  }
  return "stage";
}

struct RunState {
  Stage stage = Stage::Caption;
  std::string config_digest;
  std::set<std::string> completed_ids;
};

/// Sidecar log `<output>.state.jsonl`: a header line, then one line per
/// completed item.
inline std::filesystem::path state_path(const std::filesystem::path& output) {
  return output.string() + ".state.jsonl";
}

/// Owns the outputs of one stage run. Fresh runs truncate every output;
/// resumed runs refuse a different config digest, cut every output back to
/// its size at the last completed item, and skip completed items. `commit`
/// appends an item's records and then marks it done with the new sizes, so an
/// interrupted run never loses or duplicates a committed item.
class StageWriter {
 public:
  StageWriter(Stage stage, std::vector<std::filesystem::path> outputs, std::string config_digest,
              bool resume)
      : outputs_(std::move(outputs)) {
    if (outputs_.empty()) throw Error(ErrorCode::InvalidArgument, "stage has no outputs");
    state_.stage = stage;
    state_.config_digest = std::move(config_digest);
    auto sp = state_path(outputs_.front());
    if (resume && std::filesystem::exists(sp)) {
      load_state(sp);
      for (std::size_t i = 0; i < outputs_.size(); ++i) {
        if (!std::filesystem::exists(outputs_[i])) write_records(outputs_[i], {});
        auto committed = i < committed_sizes_.size() ? committed_sizes_[i] : 0;
        if (std::filesystem::file_size(outputs_[i]) > committed)
          std::filesystem::resize_file(outputs_[i], committed);
      }
    } else {
      for (const auto& p : outputs_) write_records(p, {});
      append_records(sp, {{{"stage", to_string(stage)}, {"config_digest", state_.config_digest}}});
    }
  }

  bool done(const std::string& id) const { return state_.completed_ids.count(id) != 0; }

  /// `per_output[i]` goes to `outputs[i]`.
  void commit(const std::string& id, const std::vector<std::vector<json>>& per_output) {
    json sizes = json::array();
    for (std::size_t i = 0; i < outputs_.size(); ++i) {
      if (i < per_output.size()) append_records(outputs_[i], per_output[i]);
      sizes.push_back(std::filesystem::file_size(outputs_[i]));
    }
    append_records(state_path(outputs_.front()), {{{"done", id}, {"sizes", std::move(sizes)}}});
    state_.completed_ids.insert(id);
  }

  const RunState& state() const { return state_; }

 private:
  void load_state(const std::filesystem::path& sp) {
    std::ifstream in(sp);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception&) {
        continue;  // torn tail of an interrupted run
      }
      if (header) {
        header = false;
        if (j.value("stage", "") != to_string(state_.stage))
          throw Error(ErrorCode::ConfigMismatch, sp.string() + " belongs to another stage");
        if (j.value("config_digest", "") != state_.config_digest)
          throw Error(ErrorCode::ConfigMismatch,
                      "refusing to resume: configuration changed since the interrupted run");
        continue;
      }
      if (j.contains("done")) {
        state_.completed_ids.insert(j["done"].get<std::string>());
        committed_sizes_ = j.value("sizes", std::vector<std::uintmax_t>{});
      }
    }
    repair_torn_tail(sp);
  }

  std::vector<std::filesystem::path> outputs_;
  std::vector<std::uintmax_t> committed_sizes_;
  RunState state_;
};

// ---------------------------------------------------------------------------
// Dataset directory layout

struct DataPaths {
  std::filesystem::path videos;
  std::filesystem::path captions;
  std::filesystem::path summaries;
  std::filesystem::path qa;
  std::filesystem::path trajectories;
  std::filesystem::path cot;

  static DataPaths in(const std::filesystem::path& dir) {
    return {dir / "videos.jsonl",       dir / "captions.jsonl", dir / "summaries.jsonl",
            dir / "qa.jsonl",           dir / "trajectories.jsonl", dir / "cot.jsonl"};
  }
};

/// Loads a file if it exists; a missing file is an empty record set.
inline std::vector<json> load_optional(const std::filesystem::path& path, RecordKind kind) {
  if (path.empty() || !std::filesystem::exists(path)) return {};
  return load_records(path, kind);
}

}  // namespace forge
