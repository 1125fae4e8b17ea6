#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cwlab {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorCode {
  kDimension,
  kContract,
  kDegenerateBatch,
  kConditioning,
  kConfiguration,
  kData,
  kStepSize,
  kNumerical,
  kIndex,
  kLabel,
  kDivergence,
  kStructure,
  kMetric,
  kDegenerateRange,
  kIo,
};

std::string_view to_string(ErrorCode code);

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

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace cwlab
