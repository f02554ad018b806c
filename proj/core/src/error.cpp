#include "peanoseg/error.hpp"

namespace peanoseg {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kCapacity: return "Capacity";
    case ErrorCode::kDegenerateChain: return "DegenerateChain";
    case ErrorCode::kZeroRow: return "ZeroRow";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kTooManyClasses: return "TooManyClasses";
    case ErrorCode::kBadFormat: return "BadFormat";
    case ErrorCode::kBadShape: return "BadShape";
    case ErrorCode::kTooManyLevels: return "TooManyLevels";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace peanoseg
