#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace distill_lab {

enum class ErrorCode {
  DimensionMismatch,
  RankDeficient,
  DomainError,
  SingularSystem,
  ZeroInitialWeight,
  UnstableStep,
  ModeMismatch,
  ShapeMismatch,
  NonFiniteLoss,
  InsufficientRounds,
  UnknownVariant,
  SubsampleTooSmall,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ZeroInitialWeight: return "ZeroInitialWeight";
    case ErrorCode::UnstableStep: return "UnstableStep";
    case ErrorCode::ModeMismatch: return "ModeMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InsufficientRounds: return "InsufficientRounds";
    case ErrorCode::UnknownVariant: return "UnknownVariant";
    case ErrorCode::SubsampleTooSmall: return "SubsampleTooSmall";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace distill_lab
