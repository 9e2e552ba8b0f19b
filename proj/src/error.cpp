#include "pcsimp/error.hpp"

namespace pcs {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::InvalidCloud: return "InvalidCloud";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::BadRatio: return "BadRatio";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NotAMesh: return "NotAMesh";
    case ErrorCode::TargetTooSmall: return "TargetTooSmall";
    case ErrorCode::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorCode::StaleTrace: return "StaleTrace";
    case ErrorCode::NaNLoss: return "NaNLoss";
    case ErrorCode::ZeroNormal: return "ZeroNormal";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

}  // namespace pcs
