#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace embkit {

enum class ErrorCode {
  EmptyInput,
  DegenerateNorm,
  ShapeMismatch,
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  TemperatureNonPositive,
  NotSquare,
  DuplicateId,
  PositiveMissingFromIndex,
  PoolTooSmall,
  InsufficientDocuments,
  TransportError,
  EmptyResponse,
  MissingFile,
  DanglingReference,
  NonPositiveGrade,
  DuplicateInRanking,
  EmptyGroup,
  StepOutOfRange,
  NonFiniteGradient,
  InsufficientData,
  EmptySource,
  NoRunsFound,
  InvalidConfig,
  ParseError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateNorm: return "DegenerateNorm";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::TemperatureNonPositive: return "TemperatureNonPositive";
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::PositiveMissingFromIndex: return "PositiveMissingFromIndex";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::InsufficientDocuments: return "InsufficientDocuments";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::NonPositiveGrade: return "NonPositiveGrade";
    case ErrorCode::DuplicateInRanking: return "DuplicateInRanking";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EmptySource: return "EmptySource";
    case ErrorCode::NoRunsFound: return "NoRunsFound";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

// All library failures are reported as embkit::Error carrying a stable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Re-raise with extra context in front of the message, keeping the code.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  std::string what = e.what();
  const auto prefix = std::string(to_string(e.code())) + ": ";
  if (what.rfind(prefix, 0) == 0) {
    what = what.substr(prefix.size());
  }
  throw Error(e.code(), context + ": " + what);
}

}  // namespace embkit
