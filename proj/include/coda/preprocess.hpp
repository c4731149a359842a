#pragma once

#include "coda/types.hpp"

#include <string>

namespace coda::preprocess {

enum class Kind { None, Pca };

Kind parse_kind(const std::string& name);
std::string to_string(Kind kind);

/// Default reduced dimension for the PCA path.
inline constexpr std::size_t kDefaultDim = 50;

/// Affine projection x -> (x - mean) * components^T.
struct LinearReducer {
  Vector mean;                 // D
  Matrix components;           // d x D, orthonormal rows
  Vector explained_variance;   // d, non-increasing
  double total_variance = 0.0; // trace of the sample covariance

  std::size_t in_dim() const noexcept { return static_cast<std::size_t>(components.cols()); }
  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(components.rows()); }
};

/// Top-d principal directions of the centered data (covariance normalized by
/// N - 1). Each component's largest-magnitude coordinate is made positive;
/// equal eigenvalues keep the solver's axis order.
LinearReducer fit_pca(const Matrix& x, std::size_t d);

/// Identity reducer: zero mean, identity components.
LinearReducer identity_reducer(std::size_t dim);

Matrix transform(const LinearReducer& reducer, const Matrix& x);

}  // namespace coda::preprocess
