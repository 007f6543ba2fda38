#include "rse/error.hpp"

namespace rse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSemistable: return "NotSemistable";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::NotStable: return "NotStable";
    case ErrorCode::SolveFailed: return "SolveFailed";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::DisconnectedNetwork: return "DisconnectedNetwork";
    case ErrorCode::UnknownBus: return "UnknownBus";
    case ErrorCode::UnknownQuantity: return "UnknownQuantity";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::DegenerateCluster: return "DegenerateCluster";
    case ErrorCode::AllMeasurementsAttacked: return "AllMeasurementsAttacked";
    case ErrorCode::UncoveredCluster: return "UncoveredCluster";
    case ErrorCode::NotDetectable: return "NotDetectable";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::UnstableStep: return "UnstableStep";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

bool Error::is_config_error() const noexcept {
  switch (code_) {
    case ErrorCode::DisconnectedNetwork:
    case ErrorCode::UnknownBus:
    case ErrorCode::UnknownQuantity:
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
    case ErrorCode::AllMeasurementsAttacked:
    case ErrorCode::GridMismatch:
    case ErrorCode::ConfigInvalid:
      return true;
    default:
      return false;
  }
}

}  // namespace rse
