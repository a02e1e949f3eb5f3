#include "levyavg/error.hpp"

namespace levyavg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidGrid: return "InvalidGrid";
    case ErrorCode::kInvalidHorizon: return "InvalidHorizon";
    case ErrorCode::kCoefficientError: return "CoefficientError";
    case ErrorCode::kNumericError: return "NumericError";
    case ErrorCode::kUnsupportedMeasure: return "UnsupportedMeasure";
    case ErrorCode::kInvalidTime: return "InvalidTime";
    case ErrorCode::kInvalidExponent: return "InvalidExponent";
    case ErrorCode::kBlowUp: return "BlowUp";
    case ErrorCode::kDomainExceeded: return "DomainExceeded";
    case ErrorCode::kInvalidBlock: return "InvalidBlock";
    case ErrorCode::kInvalidPairing: return "InvalidPairing";
    case ErrorCode::kNoSignal: return "NoSignal";
    case ErrorCode::kStaleCache: return "StaleCache";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace levyavg
