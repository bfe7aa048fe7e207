#include "mia/error.hpp"

namespace mia {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingImage: return "MissingImage";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::LabelPoolConflict: return "LabelPoolConflict";
    case ErrorCode::InsufficientPool: return "InsufficientPool";
    case ErrorCode::OracleUnavailable: return "OracleUnavailable";
    case ErrorCode::TraceMiss: return "TraceMiss";
    case ErrorCode::CorruptTrace: return "CorruptTrace";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::ThreatDowngrade: return "ThreatDowngrade";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SidecarUnavailable: return "SidecarUnavailable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::ThreatMismatch: return "ThreatMismatch";
    case ErrorCode::DegenerateTrace: return "DegenerateTrace";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::EmptyGame: return "EmptyGame";
    case ErrorCode::EmptyReport: return "EmptyReport";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace mia
