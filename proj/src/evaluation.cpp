#include "coda/evaluation.hpp"

#include "coda/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace coda::eval {
namespace {

using Eigen::Index;

void check_labels(const Matrix& x, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw Error(ErrorCode::DimMismatch, std::to_string(x.rows()) + " rows but " + std::to_string(labels.size()) + " labels");
  }
}

Matrix psd_sqrt(const Matrix& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::DegenerateCovariance, "eigendecomposition failed");
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(kEigenFloor).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

double psd_sqrt_trace(const Matrix& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::DegenerateCovariance, "eigendecomposition failed");
  return solver.eigenvalues().cwiseMax(kEigenFloor).cwiseSqrt().sum();
}

}  // namespace

ProxyKind parse_proxy(const std::string& name) {
  if (name == "nearest-centroid" || name == "centroid") return ProxyKind::NearestCentroid;
  if (name == "knn" || name == "k-nn") return ProxyKind::KNearest;
  throw Error(ErrorCode::InvalidConfig, "unknown proxy classifier '" + name + "'");
}

std::string to_string(ProxyKind kind) { return kind == ProxyKind::NearestCentroid ? "nearest-centroid" : "knn"; }

ProxyClassifier fit_proxy(const Matrix& x, const std::vector<int>& labels, ProxyKind kind, std::size_t k) {
  check_labels(x, labels);
  if (labels.empty()) throw Error(ErrorCode::EmptyClass, "no training rows");
  if (kind == ProxyKind::KNearest && k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  ProxyClassifier clf;
  clf.kind = kind;
  clf.k = k;
  clf.classes = labels;
  std::sort(clf.classes.begin(), clf.classes.end());
  clf.classes.erase(std::unique(clf.classes.begin(), clf.classes.end()), clf.classes.end());
  if (kind == ProxyKind::NearestCentroid) {
    clf.centroids = Matrix::Zero(static_cast<Index>(clf.classes.size()), x.cols());
    std::vector<std::size_t> counts(clf.classes.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto c = static_cast<std::size_t>(
          std::lower_bound(clf.classes.begin(), clf.classes.end(), labels[i]) - clf.classes.begin());
      clf.centroids.row(static_cast<Index>(c)) += x.row(static_cast<Index>(i));
      ++counts[c];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) clf.centroids.row(static_cast<Index>(c)) /= static_cast<double>(counts[c]);
  } else {
    clf.reference = x;
    clf.reference_labels = labels;
  }
  return clf;
}

int ProxyClassifier::predict(const Eigen::Ref<const Vector>& x) const {
  if (kind == ProxyKind::NearestCentroid) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centroids.rows(); ++c) {
      const double d = (centroids.row(c).transpose() - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return classes[static_cast<std::size_t>(best)];
  }
  const auto n = static_cast<std::size_t>(reference.rows());
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = {(reference.row(static_cast<Index>(i)).transpose() - x).squaredNorm(), i};
  const std::size_t kk = std::min(k, n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  // Majority vote; ties go to the class with the closer neighbor.
  std::vector<std::size_t> votes(classes.size(), 0);
  std::vector<std::size_t> first_rank(classes.size(), kk);
  for (std::size_t r = 0; r < kk; ++r) {
    const auto c = static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), reference_labels[dist[r].second]) - classes.begin());
    ++votes[c];
    first_rank[c] = std::min(first_rank[c], r);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes.size(); ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && first_rank[c] < first_rank[best])) best = c;
  }
  return classes[best];
}

EvalReport evaluate(const ProxyClassifier& classifier, const Matrix& x, const std::vector<int>& labels) {
  check_labels(x, labels);
  EvalReport report;
  report.test_size = labels.size();
  if (labels.empty()) return report;
  std::map<int, std::pair<std::size_t, std::size_t>> tally;  // correct, total
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool hit = classifier.predict(x.row(static_cast<Index>(i)).transpose()) == labels[i];
    correct += hit ? 1 : 0;
    auto& t = tally[labels[i]];
    t.first += hit ? 1 : 0;
    ++t.second;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  for (const auto& [label, t] : tally) report.per_class[label] = static_cast<double>(t.first) / static_cast<double>(t.second);
  return report;
}

double frechet_from_moments(const Vector& mean_a, const Matrix& cov_a, const Vector& mean_b, const Matrix& cov_b) {
  if (mean_a.size() != mean_b.size() || cov_a.rows() != mean_a.size() || cov_b.rows() != mean_b.size()) {
    throw Error(ErrorCode::DimMismatch, "moment dimensions differ");
  }
  const Matrix root_a = psd_sqrt(cov_a);
  const double cross = psd_sqrt_trace(root_a * cov_b * root_a);
  const double value = (mean_a - mean_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
  return std::max(0.0, value);
}

double frechet_distance(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error(ErrorCode::DimMismatch, "samples have different dimensions");
  if (a.rows() < 2 || b.rows() < 2) throw Error(ErrorCode::DegenerateCovariance, "need at least 2 rows per sample");
  const Index d = a.cols();
  auto moments = [d](const Matrix& x, Vector& mean, Matrix& cov) {
    mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - mean.transpose();
    cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    if (x.rows() < 2 * d) cov += kShrinkage * Matrix::Identity(d, d);
  };
  Vector ma, mb;
  Matrix ca, cb;
  moments(a, ma, ca);
  moments(b, mb, cb);
  return frechet_from_moments(ma, ca, mb, cb);
}

PseudoLabels pseudo_label(const Matrix& labeled, const std::vector<int>& labels, const Matrix& unlabeled,
                          double threshold) {
  check_labels(labeled, labels);
  if (!(threshold > 0.0) || threshold > 1.0) throw Error(ErrorCode::InvalidConfig, "threshold must lie in (0, 1]");
  if (labeled.cols() != unlabeled.cols()) throw Error(ErrorCode::DimMismatch, "labeled and unlabeled dims differ");
  const auto centers = fit_proxy(labeled, labels, ProxyKind::NearestCentroid);
  Matrix unit = centers.centroids;
  for (Index c = 0; c < unit.rows(); ++c) {
    const double norm = unit.row(c).norm();
    if (norm == 0.0) throw Error(ErrorCode::ZeroVector, "class " + std::to_string(centers.classes[static_cast<std::size_t>(c)]) + " has a zero center");
    unit.row(c) /= norm;
  }
  PseudoLabels out;
  for (Index i = 0; i < unlabeled.rows(); ++i) {
    const double norm = unlabeled.row(i).norm();
    if (norm == 0.0) {
      ++out.zero_vectors;
      continue;
    }
    const Vector cosines = unit * unlabeled.row(i).transpose() / norm;
    Index best = 0;
    const double top = cosines.maxCoeff(&best);
    // At threshold 1 only exact directions qualify, up to rounding.
    if (top > threshold || (threshold == 1.0 && top >= 1.0 - 1e-12)) {
      out.rows.push_back(static_cast<Index>(i));
      out.labels.push_back(centers.classes[static_cast<std::size_t>(best)]);
    } else {
      ++out.rejected;
    }
  }
  return out;
}

double sign_test_p(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  // Sum of C(n, i) / 2^n for i >= wins, in log space.
  double p = 0.0;
  for (std::size_t i = wins; i <= n; ++i) {
    const double log_term = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                            std::lgamma(static_cast<double>(n - i) + 1) - static_cast<double>(n) * std::log(2.0);
    p += std::exp(log_term);
  }
  return std::min(1.0, p);
}

}  // namespace coda::eval
