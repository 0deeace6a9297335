#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twistflow {

enum class ErrorCode {
  NonPositiveModulus,
  BadGrid,
  BidegreeOverflow,
  WrongBidegree,
  NonZeroMean,
  ShapeMismatch,
  UnsupportedParams,
  TwistMismatch,
  BundleMismatch,
  NotHermitian,
  DegenerateMetric,
  SeamViolation,
  SpectrumOutOfDomain,
  Singular,
  BadDegree,
  NotWeakHE,
  NotInjective,
  NoWitnesses,
  SpectralGapTooSmall,
  StepRejected,
  StallDetected,
  ParseError,
  UnknownPreset,
  BadField,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace twistflow
