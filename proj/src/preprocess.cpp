#include "coda/preprocess.hpp"

#include "coda/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coda::preprocess {

Kind parse_kind(const std::string& name) {
  if (name == "none") return Kind::None;
  if (name == "pca") return Kind::Pca;
  throw Error(ErrorCode::InvalidConfig, "unknown preprocess kind '" + name + "'");
}

std::string to_string(Kind kind) { return kind == Kind::Pca ? "pca" : "none"; }

LinearReducer fit_pca(const Matrix& x, std::size_t d) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto dim = static_cast<std::size_t>(x.cols());
  if (n < 2) throw Error(ErrorCode::DegenerateInput, "PCA needs at least 2 rows");
  if (d < 1 || d > std::min(n, dim)) {
    throw Error(ErrorCode::BadDim, "target dim " + std::to_string(d) + " outside [1, " +
                                       std::to_string(std::min(n, dim)) + "]");
  }

  const Vector mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const double total = cov.trace();
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateInput, "input has zero variance (rank 0)");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::DegenerateInput, "eigensolver failed");

  // Eigen returns ascending eigenvalues; order descending, stable on ties.
  std::vector<Eigen::Index> order(dim);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto& values = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });

  LinearReducer r;
  r.mean = mean;
  r.total_variance = total;
  r.components.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(dim));
  r.explained_variance.resize(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) {
    Vector v = solver.eigenvectors().col(order[k]);
    Eigen::Index pivot = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
      if (std::abs(v(i)) > std::abs(v(pivot))) pivot = i;
    }
    if (v(pivot) < 0) v = -v;
    r.components.row(static_cast<Eigen::Index>(k)) = v.transpose();
    r.explained_variance(static_cast<Eigen::Index>(k)) = std::max(0.0, values(order[k]));
  }
  return r;
}

LinearReducer identity_reducer(std::size_t dim) {
  LinearReducer r;
  const auto n = static_cast<Eigen::Index>(dim);
  r.mean = Vector::Zero(n);
  r.components = Matrix::Identity(n, n);
  r.explained_variance = Vector::Zero(n);
  return r;
}

Matrix transform(const LinearReducer& reducer, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != reducer.in_dim()) {
    throw Error(ErrorCode::BadDim, "input has " + std::to_string(x.cols()) + " columns, reducer expects " +
                                       std::to_string(reducer.in_dim()));
  }
  return (x.rowwise() - reducer.mean.transpose()) * reducer.components.transpose();
}

}  // namespace coda::preprocess
