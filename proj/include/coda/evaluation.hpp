#pragma once

#include "coda/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace coda::eval {

enum class ProxyKind { NearestCentroid, KNearest };

ProxyKind parse_proxy(const std::string& name);
std::string to_string(ProxyKind kind);

/// Stand-in for a network trained on the distilled set: nearest class mean,
/// or majority vote over the k nearest training rows.
struct ProxyClassifier {
  ProxyKind kind = ProxyKind::NearestCentroid;
  std::size_t k = 1;
  std::vector<int> classes;       // ascending
  Matrix centroids;               // one row per class (NearestCentroid)
  Matrix reference;               // training rows (KNearest)
  std::vector<int> reference_labels;

  int predict(const Eigen::Ref<const Vector>& x) const;
};

ProxyClassifier fit_proxy(const Matrix& x, const std::vector<int>& labels, ProxyKind kind, std::size_t k = 1);

struct EvalReport {
  double accuracy = 0.0;
  std::map<int, double> per_class;
  std::size_t test_size = 0;
};

EvalReport evaluate(const ProxyClassifier& classifier, const Matrix& x, const std::vector<int>& labels);

/// Ridge added to both covariances when a sample is smaller than 2 * dim.
inline constexpr double kShrinkage = 1e-6;
/// Eigenvalue floor for the PSD square roots.
inline constexpr double kEigenFloor = 1e-10;

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}); the square-root trace
/// is taken through sqrt(S_a) S_b sqrt(S_a), which is symmetric PSD.
double frechet_from_moments(const Vector& mean_a, const Matrix& cov_a, const Vector& mean_b, const Matrix& cov_b);

/// Gaussian Frechet distance between two samples (rows). Covariances use
/// N - 1 normalization.
double frechet_distance(const Matrix& a, const Matrix& b);

struct PseudoLabels {
  IndexList rows;            // indices into the unlabeled matrix that were admitted
  std::vector<int> labels;   // assigned class per admitted row
  std::size_t rejected = 0;  // best cosine did not exceed the threshold
  std::size_t zero_vectors = 0;
};

/// Class centers are the per-class means of the labeled rows; an unlabeled
/// row whose best cosine similarity to a center exceeds `threshold` takes
/// that center's class. Zero vectors are skipped and counted.
PseudoLabels pseudo_label(const Matrix& labeled, const std::vector<int>& labels, const Matrix& unlabeled,
                          double threshold);

/// Confidence threshold used for pseudo-labeling.
inline constexpr double kPseudoLabelThreshold = 0.85;

/// One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
/// Ties are dropped by the caller. Returns 1 when there are no trials.
double sign_test_p(std::size_t wins, std::size_t losses);

}  // namespace coda::eval
