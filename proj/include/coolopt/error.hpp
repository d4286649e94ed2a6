#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coolopt {

enum class ErrorCode {
  MissingColumn,
  EmptyFile,
  RowParseError,
  AllRowsInvalid,
  SchemaMismatch,
  DegenerateData,
  TooFewSamples,
  NonFiniteTarget,
  FeatureCountMismatch,
  LengthMismatch,
  NonPositiveItPower,
  TariffGap,
  TimestampMismatch,
  InvalidConfig,
  ArtifactError,
  IoError,
  OutputExists,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::RowParseError: return "RowParseError";
    case ErrorCode::AllRowsInvalid: return "AllRowsInvalid";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NonFiniteTarget: return "NonFiniteTarget";
    case ErrorCode::FeatureCountMismatch: return "FeatureCountMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonPositiveItPower: return "NonPositiveItPower";
    case ErrorCode::TariffGap: return "TariffGap";
    case ErrorCode::TimestampMismatch: return "TimestampMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ArtifactError: return "ArtifactError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::OutputExists: return "OutputExists";
  }
  return "Unknown";
}

/// Every failure raised by the library. The message is single-line so the CLI
/// can print `error: <Code>: <message>` verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace coolopt
