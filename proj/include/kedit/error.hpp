#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kedit {

enum class ErrorCode {
  kDimensionMismatch,
  kNotPositiveDefinite,
  kNonFiniteGradient,
  kNonFiniteLoss,
  kEmptyInput,
  kSubjectNotFound,
  kPositionOutOfRange,
  kLayerOutOfRange,
  kPromptTooLong,
  kInvalidArgument,
  kLengthMismatch,
  kDegenerateData,
  kEmptyAfterSubjectRemoval,
  kUnknownVariant,
  kSingularCovariance,
  kDegenerateKey,
  kSingularSystem,
  kConflict,
  kEmptyEvaluationSet,
  kTextTooShort,
  kEmptyReference,
  kNonPositiveInput,
  kInsufficientSamples,
  kInsufficientPool,
  kIo,
  kParse,
};

std::string_view error_code_name(ErrorCode code);

// Validation errors map to CLI exit code 2; everything else to 1.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kedit
