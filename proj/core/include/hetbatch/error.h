#ifndef HETBATCH_ERROR_H_
#define HETBATCH_ERROR_H_

#include <stdexcept>
#include <string>

namespace hetbatch {

enum class ErrorCode {
  kInsufficientData,
  kInvalidSample,
  kUnknownBatch,
  kOutOfRange,
  kMisorderedArguments,
  kIncompleteGroup,
  kEstimationFailure,
  kInvalidProfile,
  kInvalidInput,
  kParse,
  kInvariant,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hetbatch

#endif  // HETBATCH_ERROR_H_
