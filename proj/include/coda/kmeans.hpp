#pragma once

#include "coda/rng.hpp"
#include "coda/types.hpp"

#include <utility>
#include <vector>

namespace coda::kmeans {

struct Options {
  std::size_t max_iter = 300;
  double tol = 1e-8;  // squared centroid shift
};

struct Outcome {
  std::vector<std::size_t> assignment;
  Matrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  Matrix seeds_used;
  std::vector<double> inertia_trace;  // one entry per Lloyd iteration
};

/// Lloyd iterations from explicit seeds. Stops on an assignment fixed point,
/// a squared centroid shift below `tol`, or `max_iter`. An empty cluster
/// takes the point farthest from its centroid (among clusters with more than
/// one member).
Outcome kmeans(const Matrix& x, const Matrix& seeds, const Options& options = {});

/// Sum of squared distances from each row to its assigned centroid.
double inertia(const Matrix& x, const Matrix& centroids, const std::vector<std::size_t>& assignment);

struct PairSplit {
  Outcome outcome;
  std::pair<std::size_t, std::size_t> pair;  // indices into the candidate rows
};

/// Runs k=2 from every unordered pair of distinct candidate rows and keeps
/// the lowest inertia; ties go to the lexicographically first pair.
PairSplit best_pair_split(const Matrix& points, const Matrix& candidates, const Options& options = {});

/// Untaken row closest to `centroid`; ties go to the smallest index.
std::size_t nearest_real_point(const Vector& centroid, const Matrix& x, const std::vector<bool>& taken);

/// k-means++ seeding. Points already chosen have zero weight; if every
/// remaining point coincides with a chosen seed, fewer than k rows come back.
Matrix plus_plus_seeds(const Matrix& x, std::size_t k, Rng& rng);

/// Baseline selector: k-means++ then Lloyd with k clusters, then the nearest
/// distinct real row per centroid. Returns row indices ordered by cluster.
std::vector<std::size_t> select_nearest_to_centroids(const Matrix& x, std::size_t k, Rng& rng,
                                                     const Options& options = {});

}  // namespace coda::kmeans
