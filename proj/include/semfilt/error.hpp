#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semfilt {

enum class ErrorCode {
  Io,
  UnsupportedFormat,
  CorruptFile,
  InvalidArgument,
  DimensionMismatch,
  TooFewSamples,
  Numerical,
  Divergence,
  UndefinedKurtosis,
  UndefinedCorrelation,
  VersionMismatch,
  ShapeMismatch,
  MalformedFile,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "io";
    case ErrorCode::UnsupportedFormat: return "unsupported-format";
    case ErrorCode::CorruptFile: return "corrupt-file";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::TooFewSamples: return "too-few-samples";
    case ErrorCode::Numerical: return "numerical";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::UndefinedKurtosis: return "undefined-kurtosis";
    case ErrorCode::UndefinedCorrelation: return "undefined-correlation";
    case ErrorCode::VersionMismatch: return "version-mismatch";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::MalformedFile: return "malformed-file";
  }
  return "unknown";
}

// Every failure in the library is reported as an Error carrying a code, so
// callers can branch on the kind of failure without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace semfilt
