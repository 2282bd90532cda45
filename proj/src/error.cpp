#include "ripple/error.hpp"

namespace ripple {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DegenerateProfile: return "DegenerateProfile";
    case ErrorCode::MixedMonth: return "MixedMonth";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::UnknownFirm: return "UnknownFirm";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::DegenerateMarket: return "DegenerateMarket";
    case ErrorCode::MissingFactor: return "MissingFactor";
    case ErrorCode::NoSeedInGraph: return "NoSeedInGraph";
    case ErrorCode::ClientDead: return "ClientDead";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::DegenerateCrossSection: return "DegenerateCrossSection";
    case ErrorCode::TooFewObservations: return "TooFewObservations";
    case ErrorCode::EmptyUniverse: return "EmptyUniverse";
    case ErrorCode::ZeroVolatility: return "ZeroVolatility";
    case ErrorCode::BadCovariance: return "BadCovariance";
    case ErrorCode::EmptySchedule: return "EmptySchedule";
    case ErrorCode::InfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ripple
