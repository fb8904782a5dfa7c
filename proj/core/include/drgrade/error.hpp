#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drgrade {

enum class ErrorKind {
  kMissingFile,
  kMalformedHeader,
  kTruncatedData,
  kOutOfRange,
  kIo,
  kInvalidArgument,
  kDimensionMismatch,
  kZeroVariance,
  kRaggedRow,
  kNonFinite,
  kUnknownLabel,
  kMissingClass,
  kMissingEntry,
  kInference,
  kVersionMismatch,
  kCorruptPayload,
  kConstantMask,
  kSpecOverflow,
  kEmptyInput,
  kConfig,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure surfaced by the library is an Error carrying a kind that
// callers (and tests) can dispatch on without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kMissingFile: return "missing-file";
    case ErrorKind::kMalformedHeader: return "malformed-header";
    case ErrorKind::kTruncatedData: return "truncated-data";
    case ErrorKind::kOutOfRange: return "out-of-range";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kZeroVariance: return "zero-variance";
    case ErrorKind::kRaggedRow: return "ragged-row";
    case ErrorKind::kNonFinite: return "non-finite";
    case ErrorKind::kUnknownLabel: return "unknown-label";
    case ErrorKind::kMissingClass: return "missing-class";
    case ErrorKind::kMissingEntry: return "missing-entry";
    case ErrorKind::kInference: return "inference";
    case ErrorKind::kVersionMismatch: return "version-mismatch";
    case ErrorKind::kCorruptPayload: return "corrupt-payload";
    case ErrorKind::kConstantMask: return "constant-mask";
    case ErrorKind::kSpecOverflow: return "spec-overflow";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

}  // namespace drgrade
