#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coda {

enum class ErrorCode {
  // embedding-io
  MalformedHeader,
  MalformedData,
  DimensionMismatch,
  NonFiniteValue,
  MissingLabels,
  DuplicateSampleId,
  UnknownClass,
  Io,
  // preprocess
  DegenerateInput,
  BadDim,
  // clustering / kmeans
  TooFewPoints,
  DuplicateSeeds,
  TooFewCandidates,
  Exhausted,
  // ipc-matching
  EmptyCluster,
  InsufficientOutliers,
  CannotReachIPC,
  // diffusion
  BadT,
  NumericalUnderflow,
  DimMismatch,
  Divergence,
  // evaluation
  EmptyClass,
  DegenerateCovariance,
  ZeroVector,
  // cli
  BadSpec,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by bad inputs or configuration (CLI exit code 2),
/// false for failures that happen while doing the work (exit code 3).
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace coda
