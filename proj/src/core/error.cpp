#include "marginforge/error.hpp"

namespace marginforge {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "MF_ERR_INVALID_ARGUMENT";
    case ErrorCode::kIo: return "MF_ERR_IO";
    case ErrorCode::kParse: return "MF_ERR_PARSE";
    case ErrorCode::kSchema: return "MF_ERR_SCHEMA";
    case ErrorCode::kTooFewClasses: return "MF_ERR_TOO_FEW_CLASSES";
    case ErrorCode::kClassTooSmall: return "MF_ERR_CLASS_TOO_SMALL";
    case ErrorCode::kDegenerate: return "MF_ERR_DEGENERATE";
    case ErrorCode::kAlignment: return "MF_ERR_ALIGNMENT";
    case ErrorCode::kStale: return "MF_ERR_STALE";
    case ErrorCode::kInternal: return "MF_ERR_INTERNAL";
  }
  return "MF_ERR_UNKNOWN";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace marginforge
