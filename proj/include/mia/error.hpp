#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mia {

enum class ErrorCode {
  // dataset
  MissingImage,
  DuplicateId,
  SchemaError,
  LabelPoolConflict,
  InsufficientPool,
  // victim
  OracleUnavailable,
  TraceMiss,
  CorruptTrace,
  ShapeError,
  ThreatDowngrade,
  InvalidParams,
  // imgmath / features
  DimensionMismatch,
  SidecarUnavailable,
  ProtocolError,
  // encoder
  ThreatMismatch,
  DegenerateTrace,
  // attack / eval
  DegenerateLabels,
  EmptyGame,
  EmptyReport,
  IoError,
  // cli
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a code so callers (and tests)
/// can branch on the kind without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace mia
