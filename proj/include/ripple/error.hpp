#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ripple {

enum class ErrorCode {
  // market-graph
  DegenerateProfile,
  MixedMonth,
  BadConfig,
  UnknownFirm,
  EmptySeries,
  // asset-pricing
  InsufficientHistory,
  DegenerateMarket,
  MissingFactor,
  // propagator
  NoSeedInGraph,
  ClientDead,
  // alignment
  ZeroVector,
  EmptyStream,
  // evaluation
  SingularDesign,
  DegenerateCrossSection,
  TooFewObservations,
  // portfolio
  EmptyUniverse,
  ZeroVolatility,
  BadCovariance,
  EmptySchedule,
  // synth-market
  InfeasibleConfig,
  // ingestion
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Error raised by every module. The code is stable and machine readable;
/// the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ripple
