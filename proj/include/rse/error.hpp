#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rse {

enum class ErrorCode {
  // lti
  NotSemistable,
  IllConditioned,
  NotStable,
  SolveFailed,
  NotPSD,
  // grid / config
  DisconnectedNetwork,
  UnknownBus,
  UnknownQuantity,
  ParseError,
  ValidationError,
  // clustering
  ZeroRow,
  DegenerateCluster,
  AllMeasurementsAttacked,
  UncoveredCluster,
  // observer / sim
  NotDetectable,
  GridMismatch,
  UnstableStep,
  ConfigInvalid,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; the code identifies the failure
/// class so callers (CLI, pipeline) can map it to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& message() const noexcept { return message_; }

  /// True for configuration/input problems, false for numerical failures.
  bool is_config_error() const noexcept;

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace rse
