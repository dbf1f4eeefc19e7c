#pragma once

#include <stdexcept>
#include <string>

namespace marginforge {

// Mirrors mf_status in marginforge.h; values must stay in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kIo = 2,
  kParse = 3,
  kSchema = 4,
  kTooFewClasses = 5,
  kClassTooSmall = 6,
  kDegenerate = 7,
  kAlignment = 8,
  kStale = 9,
  kInternal = 10,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

// Contract check: throws Error(kInvalidArgument) on violation.
inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::kInvalidArgument, message);
}

}  // namespace marginforge
