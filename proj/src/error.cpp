#include "coda/error.hpp"

namespace coda {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::MalformedData: return "MalformedData";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::Io: return "Io";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::BadDim: return "BadDim";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DuplicateSeeds: return "DuplicateSeeds";
    case ErrorCode::TooFewCandidates: return "TooFewCandidates";
    case ErrorCode::Exhausted: return "Exhausted";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::InsufficientOutliers: return "InsufficientOutliers";
    case ErrorCode::CannotReachIPC: return "CannotReachIPC";
    case ErrorCode::BadT: return "BadT";
    case ErrorCode::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedHeader:
    case ErrorCode::MalformedData:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::MissingLabels:
    case ErrorCode::DuplicateSampleId:
    case ErrorCode::UnknownClass:
    case ErrorCode::BadDim:
    case ErrorCode::BadT:
    case ErrorCode::BadSpec:
    case ErrorCode::InvalidConfig:
      return true;
    default:
      return false;
  }
}

}  // namespace coda
