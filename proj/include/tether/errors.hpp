#pragma once

#include <stdexcept>
#include <string>

namespace tether {

enum class ErrorCode {
  InvalidArgument,
  SingularMassMatrix,
  FlatSingularityA,
  VanishingThrust,
  OrderUnavailable,
  ZeroLinkForce,
  DegenerateRecovery,
  NonFiniteState,
  Diverged,
  DegenerateReference,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SingularMassMatrix: return "SingularMassMatrix";
    case ErrorCode::FlatSingularityA: return "FlatSingularityA";
    case ErrorCode::VanishingThrust: return "VanishingThrust";
    case ErrorCode::OrderUnavailable: return "OrderUnavailable";
    case ErrorCode::ZeroLinkForce: return "ZeroLinkForce";
    case ErrorCode::DegenerateRecovery: return "DegenerateRecovery";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::DegenerateReference: return "DegenerateReference";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace tether
