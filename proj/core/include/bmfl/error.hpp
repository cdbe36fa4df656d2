#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bmfl {

enum class ErrorCode {
  NotCovered,
  DimensionMismatch,
  InvalidAction,
  EmptyPool,
  ShapeMismatch,
  EmptyInput,
  ZeroData,
  BudgetExceeded,
  ParseError,
  UnknownKey,
  RangeError,
  ConstraintViolation,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures surface as this exception type; `code()` lets callers
// branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bmfl
