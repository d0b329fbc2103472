#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace greybox {

enum class ErrorCode {
  kMissingColumn,
  kUnparseableTimestamp,
  kNonMonotonicTime,
  kTooManyGaps,
  kInvalidProfile,
  kOutOfRange,
  kIncompatibleStep,
  kNonPositiveParameter,
  kUnstableDiscretization,
  kInvalidArgument,
  kNoConvergedStart,
  kSingularCovariance,
  kFilterDivergence,
  kAllPointsExcluded,
  kEmptyGroup,
  kOrderMismatch,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (CLI exit codes, matrix cell markers) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace greybox
