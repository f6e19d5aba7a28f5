// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace conelab {

enum class ErrorCode {
  NonpositiveEntry,
  BadProbabilityVector,
  DimensionMismatch,
  UnsupportedDimension,
  NoConvergence,
  NegativeWeight,
  ConditionViolation,
  QOutOfRange,
  DerivativeUnstable,
  IterationBudgetExceeded,
  SchemaViolation,
  InvalidArgument,
  IntervalTooNarrow,
  WrongTilt,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace conelab
