#pragma once

#include "coda/types.hpp"

#include <limits>
#include <vector>

namespace coda::cluster {

/// Label for points that belong to no cluster. Also the value written to
/// JSON reports.
inline constexpr int kOutlier = -1;

/// Default neighbor count for core distances.
inline constexpr std::size_t kDefaultMinSamples = 3;

/// Distance from each point to its `min_samples`-th nearest neighbor, the
/// point itself excluded. Exact O(n^2 d) scan.
std::vector<double> core_distances(const Matrix& x, std::size_t min_samples);

/// d(a, b) = max(core(a), core(b), |a - b|), evaluated on demand so that
/// large classes never materialize the n x n matrix.
class MutualReachability {
 public:
  MutualReachability(const Matrix& x, std::size_t min_samples);
  MutualReachability(const Matrix& x, std::vector<double> core);

  std::size_t size() const noexcept { return static_cast<std::size_t>(x_->rows()); }
  const std::vector<double>& core() const noexcept { return core_; }

  double operator()(Index a, Index b) const;

  /// Dense matrix, for small inputs and tests.
  Matrix dense() const;

 private:
  const Matrix* x_;
  std::vector<double> core_;
};

struct Edge {
  Index a = 0;  // a < b
  Index b = 0;
  double weight = 0.0;
};

/// Strict total order on edges: weight, then (min index, max index).
bool edge_less(const Edge& lhs, const Edge& rhs) noexcept;

/// Prim's algorithm on the complete graph, O(n^2). Ties are resolved with
/// `edge_less`, which makes the tree unique.
std::vector<Edge> build_mst(const MutualReachability& distances);
std::vector<Edge> build_mst(const Matrix& dense_distances);

/// One agglomeration step. Node ids < n are points; merge k creates node n + k.
struct Merge {
  Index left = 0;
  Index right = 0;
  double distance = 0.0;
  std::size_t size = 0;
};

/// Single-linkage dendrogram from an MST (Kruskal order under `edge_less`).
std::vector<Merge> single_linkage(std::vector<Edge> mst, std::size_t n);

/// Row of the condensed tree. Node ids < num_points are points, ids >=
/// num_points are condensed clusters; the root is num_points.
struct CondensedEdge {
  Index parent = 0;
  Index child = 0;
  double lambda = 0.0;  // 1 / distance, +inf for zero distance
  std::size_t child_size = 0;
};

struct CondensedTree {
  std::size_t num_points = 0;
  std::size_t num_nodes = 0;  // clusters, including the root
  std::vector<CondensedEdge> edges;

  Index root() const noexcept { return num_points; }
};

/// Folds splits that produce a child smaller than `min_cluster_size` into
/// the parent shedding points.
CondensedTree condense_tree(const std::vector<Merge>& hierarchy, std::size_t min_cluster_size);

/// Excess-of-mass stability per condensed cluster, indexed by
/// (cluster id - num_points). Infinite lambdas are replaced by twice the
/// largest finite lambda in the tree.
std::vector<double> cluster_stability(const CondensedTree& tree);

struct ClusterResult {
  std::vector<int> labels;          // per point: cluster index or kOutlier
  std::vector<double> membership;   // per point, 0 for outliers
  std::vector<IndexList> clusters;  // member rows per cluster, ascending
  std::vector<double> stability;    // per selected cluster
  std::size_t min_cluster_size = 0;
  std::size_t min_samples = 0;
  std::size_t condensed_clusters = 0;  // nodes in the condensed tree, root included

  std::size_t num_clusters() const noexcept { return clusters.size(); }
  std::size_t num_points() const noexcept { return labels.size(); }
  IndexList outliers() const;
};

/// Flat clusters from an MST over `n` points: condense, select by excess of
/// mass (root excluded), label, and compute lambda-ratio memberships.
ClusterResult condense_and_select(const std::vector<Edge>& mst, std::size_t n, std::size_t min_cluster_size,
                                  std::size_t min_samples = kDefaultMinSamples);

struct HdbscanParams {
  std::size_t min_cluster_size = 5;
  std::size_t min_samples = kDefaultMinSamples;
};

/// Full pipeline. Degenerate inputs are handled without throwing:
/// fewer than 2 points, or fewer points than min_cluster_size, give all
/// outliers; all-coincident points give a single cluster. When
/// n <= min_samples the neighbor count is clamped to n - 1.
ClusterResult hdbscan(const Matrix& x, const HdbscanParams& params);

}  // namespace coda::cluster
