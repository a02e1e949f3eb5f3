#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace levyavg {

enum class ErrorCode {
  kInvalidGrid,
  kInvalidHorizon,
  kCoefficientError,
  kNumericError,
  kUnsupportedMeasure,
  kInvalidTime,
  kInvalidExponent,
  kBlowUp,
  kDomainExceeded,
  kInvalidBlock,
  kInvalidPairing,
  kNoSignal,
  kStaleCache,
  kInvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Base error for every failure raised by the library. The code is the
/// stable, machine-readable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a trajectory leaves the finite reals. Carries the last node
/// that was still finite so callers can inspect the partial path.
class BlowUpError : public Error {
 public:
  BlowUpError(double time, double last_finite_time, std::vector<double> last_finite_state)
      : Error(ErrorCode::kBlowUp, "non-finite state at t=" + std::to_string(time)),
        time_(time),
        last_finite_time_(last_finite_time),
        last_finite_state_(std::move(last_finite_state)) {}

  double time() const noexcept { return time_; }
  double last_finite_time() const noexcept { return last_finite_time_; }
  const std::vector<double>& last_finite_state() const noexcept { return last_finite_state_; }

 private:
  double time_;
  double last_finite_time_;
  std::vector<double> last_finite_state_;
};

}  // namespace levyavg
