#include "bmfl/error.hpp"

namespace bmfl {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotCovered: return "NotCovered";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidAction: return "InvalidAction";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ZeroData: return "ZeroData";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace bmfl
