#include "dhtv/errors.hpp"

namespace dhtv {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kDimensionTooHigh: return "DimensionTooHigh";
    case ErrorCode::kConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::kIllConditioned: return "IllConditioned";
    case ErrorCode::kPointOutsideHull: return "PointOutsideHull";
    case ErrorCode::kNegativeDiscriminant: return "NegativeDiscriminant";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kOutsideHull: return "OutsideHull";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kCorruptPayload: return "CorruptPayload";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kEmptyOperator: return "EmptyOperator";
    case ErrorCode::kUnsupportedDimension: return "UnsupportedDimension";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConvergenceFailure:
    case ErrorCode::kIllConditioned:
    case ErrorCode::kNegativeDiscriminant:
    case ErrorCode::kSingularSystem:
      return true;
    default:
      return false;
  }
}

}  // namespace dhtv
