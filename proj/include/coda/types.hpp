#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace coda {

/// Row-major so that each point is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Index = std::size_t;
using IndexList = std::vector<Index>;

/// Copies the given rows of `source` into a new matrix, in order.
inline Matrix gather_rows(const Matrix& source, const IndexList& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = source.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace coda
