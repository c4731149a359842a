#include "coda/error.hpp"
#include "coda/preprocess.hpp"
#include "coda/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace coda;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal() * (1.0 + static_cast<double>(j));
  return x;
}

Matrix pairwise(const Matrix& x) {
  Matrix d(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  return d;
}

}  // namespace

TEST_CASE("points on a line: first component follows the line, no residual") {
  Matrix x(5, 3);
  const Vector dir = Vector{{1.0, 2.0, -2.0}} / 3.0;
  for (int i = 0; i < 5; ++i) x.row(i) = (Vector{{0.5, -1.0, 2.0}} + (i * 1.7 - 3.0) * dir).transpose();
  const auto r = preprocess::fit_pca(x, 1);
  CHECK(std::abs(r.components.row(0).dot(dir.transpose())) == doctest::Approx(1.0).epsilon(1e-12));
  const Matrix back = (preprocess::transform(r, x) * r.components).rowwise() + r.mean.transpose();
  CHECK((back - x).norm() < 1e-10);
  // Sign rule: the largest-magnitude coordinate is positive.
  Eigen::Index arg = 0;
  r.components.row(0).cwiseAbs().maxCoeff(&arg);
  CHECK(r.components(0, arg) > 0.0);
}

TEST_CASE("full-dimensional fit explains all variance") {
  const Matrix x = random_matrix(40, 6, 11);
  const auto r = preprocess::fit_pca(x, 6);
  CHECK(r.explained_variance.sum() == doctest::Approx(r.total_variance).epsilon(1e-9));
  const Matrix gram = r.components * r.components.transpose();
  CHECK((gram - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-6);
  // Isometry: pairwise distances survive.
  CHECK((pairwise(preprocess::transform(r, x)) - pairwise(x)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("truncated fit agrees with a Jacobi eigensolver") {
  const Matrix x = random_matrix(100, 10, 2024);
  const auto r = preprocess::fit_pca(x, 3);
  const auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(x));

  for (int k = 0; k < 3; ++k) {
    CHECK(r.explained_variance(k) == doctest::Approx(values(k)).epsilon(1e-9));
    CHECK(std::abs(r.components.row(k).dot(vectors.col(k).transpose())) == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (int k = 1; k < 3; ++k) CHECK(r.explained_variance(k) <= r.explained_variance(k - 1));

  // Reconstruction error per (N - 1) equals the trailing eigenvalue mass.
  const Matrix centered = x.rowwise() - r.mean.transpose();
  const Matrix recon = preprocess::transform(r, x) * r.components;
  const double error = (centered - recon).squaredNorm() / 99.0;
  CHECK(error == doctest::Approx(values.tail(7).sum()).epsilon(1e-9));

  // Distortion matches the oracle's own projection.
  Matrix oracle_components(3, 10);
  for (int k = 0; k < 3; ++k) oracle_components.row(k) = vectors.col(k).transpose();
  const Matrix oracle_proj = centered * oracle_components.transpose();
  CHECK((pairwise(preprocess::transform(r, x)) - pairwise(oracle_proj)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("transform of the mean row is zero") {
  const Matrix x = random_matrix(20, 4, 5);
  const auto r = preprocess::fit_pca(x, 2);
  const Matrix mean_row = r.mean.transpose();
  CHECK(preprocess::transform(r, mean_row).norm() < 1e-12);
}

TEST_CASE("fit is deterministic") {
  const Matrix x = random_matrix(30, 5, 9);
  const auto a = preprocess::fit_pca(x, 3);
  const auto b = preprocess::fit_pca(x, 3);
  CHECK(a.components == b.components);
  CHECK(a.mean == b.mean);
}

TEST_CASE("preconditions") {
  const Matrix x = random_matrix(4, 3, 1);
  CHECK_THROWS_AS(preprocess::fit_pca(x, 0), Error);
  CHECK_THROWS_AS(preprocess::fit_pca(x, 4), Error);
  const Matrix one = x.topRows(1);
  try {
    preprocess::fit_pca(one, 1);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateInput);
  }
  const Matrix same = Matrix::Ones(5, 3);
  try {
    preprocess::fit_pca(same, 1);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateInput);
  }
  const auto r = preprocess::fit_pca(x, 2);
  try {
    preprocess::transform(r, Matrix::Zero(2, 4));
    FAIL("expected BadDim");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadDim);
  }
}

TEST_CASE("identity reducer passes rows through") {
  const Matrix x = random_matrix(6, 3, 3);
  CHECK(preprocess::transform(preprocess::identity_reducer(3), x) == x);
}
