#include "coda/error.hpp"
#include "coda/evaluation.hpp"
#include "coda/rng.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace coda;
using namespace coda::eval;

namespace {

Matrix gaussian_sample(Rng& rng, std::size_t n, const Vector& mean, const Matrix& chol) {
  Matrix x(static_cast<Eigen::Index>(n), mean.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    x.row(i) = (mean + chol * fixture::normal_vector(rng, static_cast<std::size_t>(mean.size()))).transpose();
  return x;
}

// Symmetric PSD square root through the Jacobi eigensolver.
Matrix sqrt_psd(const Matrix& a) {
  auto [values, vectors] = oracle::jacobi_eigen(a);
  for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = std::sqrt(std::max(values(i), 0.0));
  return vectors * values.asDiagonal() * vectors.transpose();
}

double oracle_frechet(const Vector& ma, const Matrix& ca, const Vector& mb, const Matrix& cb) {
  const Matrix root_a = sqrt_psd(ca);
  const Matrix inner = sqrt_psd(root_a * cb * root_a);
  return (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2.0 * inner.trace();
}

// Exact upper binomial tail with integer combinatorics.
double oracle_sign_p(unsigned wins, unsigned losses) {
  const unsigned n = wins + losses;
  double total = 0.0;
  for (unsigned i = wins; i <= n; ++i) {
    double c = 1.0;
    for (unsigned j = 1; j <= i; ++j) c = c * (n - i + j) / j;
    total += c;
  }
  return total / std::pow(2.0, n);
}

}  // namespace

TEST_CASE("nearest centroid with one sample per class") {
  Matrix x(3, 2);
  x << 0, 0, 5, 5, -5, 5;
  const auto clf = fit_proxy(x, {3, 1, 2}, ProxyKind::NearestCentroid);
  CHECK(clf.classes == std::vector<int>{1, 2, 3});
  CHECK(clf.centroids.row(0) == x.row(1));
  CHECK(clf.centroids.row(1) == x.row(2));
  CHECK(clf.centroids.row(2) == x.row(0));
  CHECK(clf.predict((Vector(2) << 4.0, 4.0).finished()) == 1);
}

TEST_CASE("duplicated training rows leave the classifier unchanged") {
  Rng rng(1);
  Matrix x(20, 3);
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    x.row(i) = fixture::normal_vector(rng, 3).transpose();
    y.push_back(1 + i % 3);
  }
  Matrix doubled(40, 3);
  doubled << x, x;
  std::vector<int> yy = y;
  yy.insert(yy.end(), y.begin(), y.end());
  const auto a = fit_proxy(x, y, ProxyKind::NearestCentroid);
  const auto b = fit_proxy(doubled, yy, ProxyKind::NearestCentroid);
  CHECK((a.centroids - b.centroids).norm() <= 1e-12);
  const auto ka = fit_proxy(x, y, ProxyKind::KNearest, 3);
  const auto kb = fit_proxy(doubled, yy, ProxyKind::KNearest, 6);
  for (int i = 0; i < 50; ++i) {
    const Vector q = fixture::normal_vector(rng, 3);
    CHECK(ka.predict(q) == kb.predict(q));
  }
}

TEST_CASE("separable blobs are classified perfectly") {
  Rng rng(2);
  const Matrix chol = Matrix::Identity(4, 4);
  const Vector m1 = Vector::Zero(4);
  const Vector m2 = Vector::Constant(4, 10.0);
  Matrix train(200, 4);
  train << gaussian_sample(rng, 100, m1, chol), gaussian_sample(rng, 100, m2, chol);
  Matrix test(100, 4);
  test << gaussian_sample(rng, 50, m1, chol), gaussian_sample(rng, 50, m2, chol);
  std::vector<int> ytrain(200, 1);
  std::fill(ytrain.begin() + 100, ytrain.end(), 2);
  std::vector<int> ytest(100, 1);
  std::fill(ytest.begin() + 50, ytest.end(), 2);
  for (auto kind : {ProxyKind::NearestCentroid, ProxyKind::KNearest}) {
    const auto report = evaluate(fit_proxy(train, ytrain, kind, 5), test, ytest);
    CHECK(report.accuracy == 1.0);
    CHECK(report.per_class.at(1) == 1.0);
    CHECK(report.test_size == 100);
  }
}

TEST_CASE("1-NN on its own training set is perfect") {
  Rng rng(3);
  Matrix x(60, 5);
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    x.row(i) = fixture::normal_vector(rng, 5).transpose();
    y.push_back(static_cast<int>(rng.below(4)));
  }
  CHECK(evaluate(fit_proxy(x, y, ProxyKind::KNearest, 1), x, y).accuracy == 1.0);
}

TEST_CASE("random labels score near chance") {
  // Binomial bound: n = 2000, p = 1/4, four standard deviations.
  Rng rng(4);
  const std::size_t n = 2000;
  Matrix train(400, 3);
  std::vector<int> ytrain;
  for (Eigen::Index i = 0; i < 400; ++i) {
    train.row(i) = fixture::normal_vector(rng, 3).transpose();
    ytrain.push_back(static_cast<int>(rng.below(4)));
  }
  Matrix test(static_cast<Eigen::Index>(n), 3);
  std::vector<int> ytest;
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    test.row(i) = fixture::normal_vector(rng, 3).transpose();
    ytest.push_back(static_cast<int>(rng.below(4)));
  }
  const double sd = std::sqrt(0.25 * 0.75 / static_cast<double>(n));
  for (auto kind : {ProxyKind::NearestCentroid, ProxyKind::KNearest}) {
    const double acc = evaluate(fit_proxy(train, ytrain, kind, 5), test, ytest).accuracy;
    CHECK(std::abs(acc - 0.25) <= 4.0 * sd);
  }
}

TEST_CASE("accuracy ignores test-row order") {
  Rng rng(5);
  Matrix train(30, 2);
  Matrix test(40, 2);
  std::vector<int> ytrain;
  std::vector<int> ytest;
  for (int i = 0; i < 30; ++i) {
    train.row(i) = fixture::normal_vector(rng, 2).transpose();
    ytrain.push_back(i % 3);
  }
  for (int i = 0; i < 40; ++i) {
    test.row(i) = fixture::normal_vector(rng, 2).transpose();
    ytest.push_back(i % 3);
  }
  const auto clf = fit_proxy(train, ytrain, ProxyKind::KNearest, 3);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  Matrix shuffled(40, 2);
  std::vector<int> yshuffled;
  for (int i = 0; i < 40; ++i) {
    shuffled.row(i) = test.row(perm[static_cast<std::size_t>(i)]);
    yshuffled.push_back(ytest[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
  }
  CHECK(evaluate(clf, test, ytest).accuracy == evaluate(clf, shuffled, yshuffled).accuracy);
}

TEST_CASE("proxy preconditions") {
  CHECK_THROWS_AS(fit_proxy(Matrix(0, 2), {}, ProxyKind::NearestCentroid), Error);
  CHECK_THROWS_AS(fit_proxy(Matrix::Zero(2, 2), {1}, ProxyKind::NearestCentroid), Error);
  CHECK_THROWS_AS(fit_proxy(Matrix::Zero(2, 2), {1, 2}, ProxyKind::KNearest, 0), Error);
  CHECK(parse_proxy(to_string(ProxyKind::KNearest)) == ProxyKind::KNearest);
}

TEST_CASE("Frechet distance closed forms") {
  const Vector zero = Vector::Zero(2);
  CHECK(frechet_from_moments(zero, Matrix::Identity(2, 2), zero, 4.0 * Matrix::Identity(2, 2)) ==
        doctest::Approx(2.0).epsilon(1e-12));

  Rng rng(6);
  Matrix chol = Matrix::Random(3, 3);
  const Matrix a = gaussian_sample(rng, 500, Vector::Zero(3), chol);
  const Vector v = (Vector(3) << 1.0, -2.0, 0.5).finished();
  const Matrix b = a.rowwise() + v.transpose();
  CHECK(frechet_distance(a, b) == doctest::Approx(v.squaredNorm()).epsilon(1e-6));
  CHECK(frechet_distance(a, a) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(frechet_distance(a, b) == doctest::Approx(frechet_distance(b, a)).epsilon(1e-12));
}

TEST_CASE("Frechet distance agrees with an independent square root") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix la = Matrix::Random(4, 4);
    const Matrix lb = Matrix::Random(4, 4);
    const Matrix ca = la * la.transpose() + 0.1 * Matrix::Identity(4, 4);
    const Matrix cb = lb * lb.transpose() + 0.1 * Matrix::Identity(4, 4);
    const Vector ma = fixture::normal_vector(rng, 4);
    const Vector mb = fixture::normal_vector(rng, 4);
    const double expected = oracle_frechet(ma, ca, mb, cb);
    CHECK(frechet_from_moments(ma, ca, mb, cb) == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("same distribution, large samples: distance near zero") {
  Rng rng(8);
  const Matrix chol = Matrix::Identity(3, 3);
  const Matrix a = gaussian_sample(rng, 10000, Vector::Zero(3), chol);
  const Matrix b = gaussian_sample(rng, 10000, Vector::Zero(3), chol);
  CHECK(frechet_distance(a, b) < 0.05);
}

TEST_CASE("small samples are shrunk rather than rejected") {
  Rng rng(9);
  const Matrix a = gaussian_sample(rng, 3, Vector::Zero(8), Matrix::Identity(8, 8));
  const Matrix b = gaussian_sample(rng, 3, Vector::Zero(8), Matrix::Identity(8, 8));
  const double d = frechet_distance(a, b);
  CHECK(std::isfinite(d));
  CHECK(d >= 0.0);
  CHECK_THROWS_AS(frechet_distance(a.topRows(1), b), Error);
  CHECK_THROWS_AS(frechet_distance(a, Matrix::Zero(3, 7)), Error);
}

TEST_CASE("pseudo-labeling by cosine to class centers") {
  Matrix labeled(4, 2);
  labeled << 1, 0, 3, 0, 0, 2, 0, 4;
  const std::vector<int> y = {1, 1, 2, 2};
  Matrix unlabeled(5, 2);
  unlabeled << 5, 0,  // exactly class 1's direction
      0.1, 3,         // close to class 2
      1, 1,           // 45 degrees: cosine 0.707, rejected
      0, 0,           // zero vector
      2, 0.5;         // cosine 0.970 to class 1
  const auto out = pseudo_label(labeled, y, unlabeled, kPseudoLabelThreshold);
  CHECK(out.rows == IndexList{0, 1, 4});
  CHECK(out.labels == std::vector<int>{1, 2, 1});
  CHECK(out.rejected == 1);
  CHECK(out.zero_vectors == 1);

  const auto exact = pseudo_label(labeled, y, unlabeled, 1.0);
  CHECK(exact.rows == IndexList{0});
  CHECK_THROWS_AS(pseudo_label(labeled, y, unlabeled, 0.0), Error);
  CHECK_THROWS_AS(pseudo_label(labeled, y, unlabeled, 1.5), Error);

  Matrix centered(2, 2);
  centered << 1, 1, -1, -1;
  CHECK_THROWS_AS(pseudo_label(centered, {1, 1}, unlabeled, 0.85), Error);
}

TEST_CASE("sign test against exact binomial tails") {
  CHECK(sign_test_p(0, 0) == 1.0);
  CHECK(sign_test_p(0, 5) == doctest::Approx(1.0));
  CHECK(sign_test_p(5, 0) == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
  for (unsigned n = 1; n <= 30; ++n)
    for (unsigned w = 0; w <= n; ++w)
      CHECK(sign_test_p(w, n - w) == doctest::Approx(oracle_sign_p(w, n - w)).epsilon(1e-10));
  // 15 of 20 is the smallest win count below 0.05.
  CHECK(sign_test_p(15, 5) < 0.05);
  CHECK(sign_test_p(14, 6) > 0.05);
}
