#include "coda/kmeans.hpp"

#include "coda/error.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace coda::kmeans {
namespace {

using Eigen::Index;

std::size_t nearest_centroid(const Matrix& centroids, const Matrix& x, Index row, double* best_dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centroids.rows(); ++c) {
    const double d = (x.row(row) - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  if (best_dist) *best_dist = best_d;
  return best;
}

bool has_duplicate_rows(const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = i + 1; j < m.rows(); ++j) {
      if (m.row(i) == m.row(j)) return true;
    }
  }
  return false;
}

}  // namespace

double inertia(const Matrix& x, const Matrix& centroids, const std::vector<std::size_t>& assignment) {
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    total += (x.row(i) - centroids.row(static_cast<Index>(assignment[static_cast<std::size_t>(i)]))).squaredNorm();
  }
  return total;
}

Outcome kmeans(const Matrix& x, const Matrix& seeds, const Options& options) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto k = static_cast<std::size_t>(seeds.rows());
  if (k < 1 || n < k) {
    throw Error(ErrorCode::TooFewPoints, std::to_string(n) + " points for " + std::to_string(k) + " clusters");
  }
  if (seeds.cols() != x.cols()) throw Error(ErrorCode::DimMismatch, "seed dimension differs from data");
  if (has_duplicate_rows(seeds)) throw Error(ErrorCode::DuplicateSeeds, "k-means seeds must be distinct");

  Outcome out;
  out.seeds_used = seeds;
  out.centroids = seeds;
  out.assignment.assign(n, k);  // k = "unassigned" so the first pass always changes
  std::vector<double> dist(n);
  std::vector<std::size_t> counts(k);

  for (std::size_t iter = 0; iter < std::max<std::size_t>(options.max_iter, 1); ++iter) {
    std::vector<std::size_t> assignment(n);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      assignment[i] = nearest_centroid(out.centroids, x, static_cast<Index>(i), &dist[i]);
      ++counts[assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t donor = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[assignment[i]] < 2) continue;
        if (donor == n || dist[i] > dist[donor]) donor = i;
      }
      --counts[assignment[donor]];
      assignment[donor] = c;
      dist[donor] = 0.0;
      ++counts[c];
    }

    Matrix updated = Matrix::Zero(static_cast<Index>(k), x.cols());
    for (std::size_t i = 0; i < n; ++i) updated.row(static_cast<Index>(assignment[i])) += x.row(static_cast<Index>(i));
    for (std::size_t c = 0; c < k; ++c) updated.row(static_cast<Index>(c)) /= static_cast<double>(counts[c]);

    double shift = 0.0;
    for (Index c = 0; c < updated.rows(); ++c) {
      shift = std::max(shift, (updated.row(c) - out.centroids.row(c)).squaredNorm());
    }
    const bool fixed_point = assignment == out.assignment;
    out.assignment = std::move(assignment);
    out.centroids = std::move(updated);
    out.inertia = inertia(x, out.centroids, out.assignment);
    // Lloyd steps never raise the objective; allow for summation rounding.
    assert(out.inertia_trace.empty() ||
           out.inertia <= out.inertia_trace.back() * (1.0 + 1e-12) + 1e-300);
    out.inertia_trace.push_back(out.inertia);
    out.iterations = iter + 1;
    if (fixed_point || shift < options.tol) break;
  }
  return out;
}

PairSplit best_pair_split(const Matrix& points, const Matrix& candidates, const Options& options) {
  if (points.rows() < 2) throw Error(ErrorCode::TooFewPoints, "a split needs at least 2 points");
  std::vector<std::size_t> unique;
  for (Index i = 0; i < candidates.rows(); ++i) {
    const bool duplicate = std::any_of(unique.begin(), unique.end(), [&](std::size_t j) {
      return candidates.row(i) == candidates.row(static_cast<Index>(j));
    });
    if (!duplicate) unique.push_back(static_cast<std::size_t>(i));
  }
  if (unique.size() < 2) {
    throw Error(ErrorCode::TooFewCandidates, "need 2 distinct candidates, have " + std::to_string(unique.size()));
  }
  PairSplit best;
  bool have = false;
  for (std::size_t a = 0; a < unique.size(); ++a) {
    for (std::size_t b = a + 1; b < unique.size(); ++b) {
      Matrix seeds(2, candidates.cols());
      seeds.row(0) = candidates.row(static_cast<Index>(unique[a]));
      seeds.row(1) = candidates.row(static_cast<Index>(unique[b]));
      Outcome outcome = kmeans(points, seeds, options);
      if (!have || outcome.inertia < best.outcome.inertia) {
        best.outcome = std::move(outcome);
        best.pair = {unique[a], unique[b]};
        have = true;
      }
    }
  }
  return best;
}

std::size_t nearest_real_point(const Vector& centroid, const Matrix& x, const std::vector<bool>& taken) {
  std::size_t best = static_cast<std::size_t>(x.rows());
  double best_d = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < x.rows(); ++i) {
    if (static_cast<std::size_t>(i) < taken.size() && taken[static_cast<std::size_t>(i)]) continue;
    const double d = (x.row(i) - centroid.transpose()).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(i);
    }
  }
  if (best == static_cast<std::size_t>(x.rows())) throw Error(ErrorCode::Exhausted, "every row is taken");
  return best;
}

Matrix plus_plus_seeds(const Matrix& x, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k < 1 || n < k) throw Error(ErrorCode::TooFewPoints, std::to_string(n) + " points for " + std::to_string(k) + " seeds");
  std::vector<std::size_t> chosen{static_cast<std::size_t>(rng.below(n))};
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (x.row(static_cast<Index>(i)) - x.row(static_cast<Index>(chosen[0]))).squaredNorm();
  while (chosen.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (!(total > 0.0)) break;
    double target = rng.uniform() * total;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      target -= d2[i];
      if (target < 0.0) break;
    }
    chosen.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(static_cast<Index>(i)) - x.row(static_cast<Index>(pick))).squaredNorm());
    }
  }
  return gather_rows(x, chosen);
}

std::vector<std::size_t> select_nearest_to_centroids(const Matrix& x, std::size_t k, Rng& rng,
                                                     const Options& options) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < k) throw Error(ErrorCode::TooFewPoints, std::to_string(n) + " points for " + std::to_string(k) + " picks");
  const Matrix seeds = plus_plus_seeds(x, k, rng);
  const Outcome outcome = kmeans(x, seeds, options);
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> picks;
  picks.reserve(k);
  for (Index c = 0; c < outcome.centroids.rows(); ++c) {
    const std::size_t row = nearest_real_point(outcome.centroids.row(c).transpose(), x, taken);
    taken[row] = true;
    picks.push_back(row);
  }
  // Fewer distinct seeds than k: fill from the same centroids.
  for (Index c = 0; picks.size() < k; c = (c + 1) % outcome.centroids.rows()) {
    const std::size_t row = nearest_real_point(outcome.centroids.row(c).transpose(), x, taken);
    taken[row] = true;
    picks.push_back(row);
  }
  return picks;
}

}  // namespace coda::kmeans
