// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace forge {

enum class ErrorCode {
  // gateway
  BackendUnavailable,
  RateLimited,
  ScriptMiss,
  JudgeUnparseable,
  // captions
  LineUnparseable,
  SegmentationUnparseable,
  CoverageGap,
  DescriptionUnparseable,
  RelativeTimeOutOfRange,
  EmptyCaption,
  // qa
  EmptySummary,
  SummaryNotShorter,
  GenerationUnparseable,
  UnknownQuestionType,
  VerifierUnparseable,
  RewriteUnparseable,
  AmbiguousOptions,
  // cot
  DirectiveUnparseable,
  ConversionInvalid,
  // store
  SchemaViolation,
  TornLine,
  DanglingReference,
  ConfigMismatch,
  Io,
  // cli
  ConfigInvalid,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::ScriptMiss: return "ScriptMiss";
    case ErrorCode::JudgeUnparseable: return "JudgeUnparseable";
    case ErrorCode::LineUnparseable: return "LineUnparseable";
    case ErrorCode::SegmentationUnparseable: return "SegmentationUnparseable";
    case ErrorCode::CoverageGap: return "CoverageGap";
    case ErrorCode::DescriptionUnparseable: return "DescriptionUnparseable";
    case ErrorCode::RelativeTimeOutOfRange: return "RelativeTimeOutOfRange";
    case ErrorCode::EmptyCaption: return "EmptyCaption";
    case ErrorCode::EmptySummary: return "EmptySummary";
    case ErrorCode::SummaryNotShorter: return "SummaryNotShorter";
    case ErrorCode::GenerationUnparseable: return "GenerationUnparseable";
    case ErrorCode::UnknownQuestionType: return "UnknownQuestionType";
    case ErrorCode::VerifierUnparseable: return "VerifierUnparseable";
    case ErrorCode::RewriteUnparseable: return "RewriteUnparseable";
    case ErrorCode::AmbiguousOptions: return "AmbiguousOptions";
    case ErrorCode::DirectiveUnparseable: return "DirectiveUnparseable";
    case ErrorCode::ConversionInvalid: return "ConversionInvalid";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::TornLine: return "TornLine";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::Io: return "Io";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every recoverable failure in the library is a forge::Error carrying a code.
/// `line()` is set for the line-oriented parsers (timed lines, JSONL), 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::size_t line = 0)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::size_t line_;
};

}  // namespace forge
