#include "greybox/error.h"

namespace greybox {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kUnparseableTimestamp: return "UnparseableTimestamp";
    case ErrorCode::kNonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::kTooManyGaps: return "TooManyGaps";
    case ErrorCode::kInvalidProfile: return "InvalidProfile";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kIncompatibleStep: return "IncompatibleStep";
    case ErrorCode::kNonPositiveParameter: return "NonPositiveParameter";
    case ErrorCode::kUnstableDiscretization: return "UnstableDiscretization";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNoConvergedStart: return "NoConvergedStart";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kFilterDivergence: return "FilterDivergence";
    case ErrorCode::kAllPointsExcluded: return "AllPointsExcluded";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kOrderMismatch: return "OrderMismatch";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace greybox
