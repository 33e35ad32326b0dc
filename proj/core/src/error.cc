#include "hetbatch/error.h"

namespace hetbatch {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInsufficientData:
      return "insufficient data";
    case ErrorCode::kInvalidSample:
      return "invalid sample";
    case ErrorCode::kUnknownBatch:
      return "unknown batch";
    case ErrorCode::kOutOfRange:
      return "out of range";
    case ErrorCode::kMisorderedArguments:
      return "misordered arguments";
    case ErrorCode::kIncompleteGroup:
      return "incomplete group";
    case ErrorCode::kEstimationFailure:
      return "estimation failure";
    case ErrorCode::kInvalidProfile:
      return "invalid profile";
    case ErrorCode::kInvalidInput:
      return "invalid input";
    case ErrorCode::kParse:
      return "parse error";
    case ErrorCode::kInvariant:
      return "invariant violation";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

}  // namespace hetbatch
