#include "kedit/error.hpp"

namespace kedit {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kSubjectNotFound: return "SubjectNotFound";
    case ErrorCode::kPositionOutOfRange: return "PositionOutOfRange";
    case ErrorCode::kLayerOutOfRange: return "LayerOutOfRange";
    case ErrorCode::kPromptTooLong: return "PromptTooLong";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kDegenerateData: return "DegenerateData";
    case ErrorCode::kEmptyAfterSubjectRemoval: return "EmptyAfterSubjectRemoval";
    case ErrorCode::kUnknownVariant: return "UnknownVariant";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kDegenerateKey: return "DegenerateKey";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kConflict: return "ConflictReport";
    case ErrorCode::kEmptyEvaluationSet: return "EmptyEvaluationSet";
    case ErrorCode::kTextTooShort: return "TextTooShort";
    case ErrorCode::kEmptyReference: return "EmptyReference";
    case ErrorCode::kNonPositiveInput: return "NonPositiveInput";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kInsufficientPool: return "InsufficientPool";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kParse: return "ParseError";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConflict:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kUnknownVariant:
    case ErrorCode::kParse:
    case ErrorCode::kInsufficientPool:
      return true;
    default:
      return false;
  }
}

}  // namespace kedit
