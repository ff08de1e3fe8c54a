#include "ccvolt/error.hpp"

namespace ccvolt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::DisconnectedBus: return "DisconnectedBus";
    case ErrorCode::DuplicateLine: return "DuplicateLine";
    case ErrorCode::BadBusId: return "BadBusId";
    case ErrorCode::BadImpedance: return "BadImpedance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::InvalidBox: return "InvalidBox";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::DegenerateBounds: return "DegenerateBounds";
    case ErrorCode::InvalidProblem: return "InvalidProblem";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace ccvolt
