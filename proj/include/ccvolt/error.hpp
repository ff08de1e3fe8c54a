#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ccvolt {

enum class ErrorCode {
  // network
  CycleDetected,
  DisconnectedBus,
  DuplicateLine,
  BadBusId,
  BadImpedance,
  // linear algebra / shapes
  DimensionMismatch,
  NotSymmetric,
  NotPositiveDefinite,
  NonPositiveScale,
  // probability engine
  InvalidBox,
  NumericalFailure,
  // dispatch problem
  DegenerateBounds,
  InvalidProblem,
  // feeder files
  ParseError,
  ValidationError,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` names the violated invariant.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ccvolt
