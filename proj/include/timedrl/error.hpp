#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace timedrl {

enum class ErrorCode {
  ShapeMismatch,
  NonScalarLoss,
  StaleTape,
  DegenerateBatch,
  InvalidProbability,
  ParseError,
  EmptyDataset,
  TooSmall,
  TooShort,
  ConfigInvalid,
  UnknownMethod,
  InvalidParam,
  InvalidFraction,
  TooFewRows,
  TooFewEmbeddings,
  NonFiniteGradient,
  NonFiniteLoss,
  IoError,
  VersionMismatch,
  CorruptChecksum,
  NotPretrained,
  LengthMismatch,
  LabelOutOfRange,
  StatsMismatch,
  NoLabeledSamples,
  ConfigError,
  TaskMismatch,
  MultipleAxes,
  InvalidSpec,
};

inline std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::StaleTape: return "StaleTape";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::UnknownMethod: return "UnknownMethod";
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::InvalidFraction: return "InvalidFraction";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::TooFewEmbeddings: return "TooFewEmbeddings";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptChecksum: return "CorruptChecksum";
    case ErrorCode::NotPretrained: return "NotPretrained";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::StatsMismatch: return "StatsMismatch";
    case ErrorCode::NoLabeledSamples: return "NoLabeledSamples";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TaskMismatch: return "TaskMismatch";
    case ErrorCode::MultipleAxes: return "MultipleAxes";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

}  // namespace timedrl
