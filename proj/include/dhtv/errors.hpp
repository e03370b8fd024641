#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dhtv {

enum class ErrorCode {
  kDegenerateInput,
  kDimensionTooHigh,
  kConvergenceFailure,
  kIllConditioned,
  kPointOutsideHull,
  kNegativeDiscriminant,
  kDimensionMismatch,
  kSingularSystem,
  kInsufficientData,
  kOutsideHull,
  kFormatVersionMismatch,
  kCorruptPayload,
  kParseError,
  kMissingColumn,
  kEmptyOperator,
  kUnsupportedDimension,
  kInvalidArgument,
  kIoError,
};

std::string_view error_name(ErrorCode code);

// Numerical failures map to CLI exit code 3, everything else to 2.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace dhtv
