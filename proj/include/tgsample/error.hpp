#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tgsample {

enum class ErrorCode {
  MonotonicityViolation,
  SelfLoop,
  IndexOutOfRange,
  InvalidArgument,
  MalformedRow,
  NonFiniteFeature,
  EmptyFile,
  UnsplittableStream,
  TooFewEvents,
  EmptyEvalSet,
  DegenerateUniverse,
  ShapeMismatch,
  NonFinite,
  MissingGradient,
  DegenerateLabels,
  Io,
  CheckpointMismatch,
  WorkloadTooSmall,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::UnsplittableStream: return "UnsplittableStream";
    case ErrorCode::TooFewEvents: return "TooFewEvents";
    case ErrorCode::EmptyEvalSet: return "EmptyEvalSet";
    case ErrorCode::DegenerateUniverse: return "DegenerateUniverse";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::MissingGradient: return "MissingGradient";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::Io: return "Io";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::WorkloadTooSmall: return "WorkloadTooSmall";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace tgsample
