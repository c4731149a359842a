#include "coda/hdbscan.hpp"

#include "coda/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coda::cluster {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double euclidean(const Matrix& x, Index a, Index b) {
  return std::sqrt((x.row(static_cast<Eigen::Index>(a)) - x.row(static_cast<Eigen::Index>(b))).squaredNorm());
}

// Keeps the k smallest values seen so far, ascending.
void push_smallest(double* top, std::size_t k, double value) {
  if (!(value < top[k - 1])) return;
  std::size_t pos = k - 1;
  while (pos > 0 && top[pos - 1] > value) {
    top[pos] = top[pos - 1];
    --pos;
  }
  top[pos] = value;
}

template <typename Weight>
std::vector<Edge> prim(std::size_t n, Weight&& weight) {
  std::vector<Edge> tree;
  if (n < 2) return tree;
  tree.reserve(n - 1);
  std::vector<bool> in_tree(n, false);
  std::vector<Edge> best(n, Edge{0, 0, kInf});
  Index current = 0;
  in_tree[0] = true;
  for (std::size_t added = 1; added < n; ++added) {
    Index next = n;
    for (Index v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const Edge candidate{std::min(current, v), std::max(current, v), weight(current, v)};
      if (edge_less(candidate, best[v])) best[v] = candidate;
      if (next == n || edge_less(best[v], best[next])) next = v;
    }
    in_tree[next] = true;
    tree.push_back(best[next]);
    current = next;
  }
  return tree;
}

double lambda_of(double distance) { return distance > 0.0 ? 1.0 / distance : kInf; }

}  // namespace

std::vector<double> core_distances(const Matrix& x, std::size_t min_samples) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (min_samples < 1) throw Error(ErrorCode::InvalidConfig, "min_samples must be >= 1");
  if (n <= min_samples) {
    throw Error(ErrorCode::TooFewPoints, std::to_string(n) + " points cannot have a " +
                                             std::to_string(min_samples) + "-th neighbor");
  }
  const std::size_t k = min_samples;
  std::vector<double> top(n * k, kInf);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double d = euclidean(x, i, j);
      push_smallest(&top[i * k], k, d);
      push_smallest(&top[j * k], k, d);
    }
  }
  std::vector<double> core(n);
  for (Index i = 0; i < n; ++i) core[i] = top[i * k + k - 1];
  return core;
}

MutualReachability::MutualReachability(const Matrix& x, std::size_t min_samples)
    : x_(&x), core_(core_distances(x, min_samples)) {}

MutualReachability::MutualReachability(const Matrix& x, std::vector<double> core) : x_(&x), core_(std::move(core)) {
  if (core_.size() != size()) throw Error(ErrorCode::DimMismatch, "core distance count does not match points");
}

double MutualReachability::operator()(Index a, Index b) const {
  if (a == b) return 0.0;
  return std::max({core_[a], core_[b], euclidean(*x_, a, b)});
}

Matrix MutualReachability::dense() const {
  const auto n = static_cast<Eigen::Index>(size());
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      m(i, j) = m(j, i) = (*this)(static_cast<Index>(i), static_cast<Index>(j));
    }
  }
  return m;
}

bool edge_less(const Edge& lhs, const Edge& rhs) noexcept {
  if (lhs.weight != rhs.weight) return lhs.weight < rhs.weight;
  if (lhs.a != rhs.a) return lhs.a < rhs.a;
  return lhs.b < rhs.b;
}

std::vector<Edge> build_mst(const MutualReachability& distances) {
  return prim(distances.size(), [&](Index a, Index b) { return distances(a, b); });
}

std::vector<Edge> build_mst(const Matrix& dense_distances) {
  if (dense_distances.rows() != dense_distances.cols()) {
    throw Error(ErrorCode::DimMismatch, "distance matrix must be square");
  }
  return prim(static_cast<std::size_t>(dense_distances.rows()), [&](Index a, Index b) {
    return dense_distances(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  });
}

std::vector<Merge> single_linkage(std::vector<Edge> mst, std::size_t n) {
  if (n > 0 && mst.size() != n - 1) {
    throw Error(ErrorCode::DimMismatch, "spanning tree over " + std::to_string(n) + " points needs " +
                                            std::to_string(n - 1) + " edges");
  }
  std::sort(mst.begin(), mst.end(), edge_less);
  std::vector<Index> parent(n);
  std::iota(parent.begin(), parent.end(), Index{0});
  std::vector<Index> node(n);
  std::iota(node.begin(), node.end(), Index{0});
  std::vector<std::size_t> size(n, 1);
  auto find = [&](Index v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  std::vector<Merge> merges;
  merges.reserve(mst.size());
  for (const Edge& e : mst) {
    const Index ra = find(e.a);
    const Index rb = find(e.b);
    if (ra == rb) throw Error(ErrorCode::DimMismatch, "edge list contains a cycle");
    const std::size_t merged = size[ra] + size[rb];
    merges.push_back(Merge{node[ra], node[rb], e.weight, merged});
    parent[rb] = ra;
    size[ra] = merged;
    node[ra] = n + merges.size() - 1;
  }
  return merges;
}

CondensedTree condense_tree(const std::vector<Merge>& hierarchy, std::size_t min_cluster_size) {
  const std::size_t n = hierarchy.size() + 1;
  CondensedTree tree;
  tree.num_points = n;
  tree.num_nodes = 1;
  if (hierarchy.empty()) return tree;

  const Index root = 2 * n - 2;
  auto node_size = [&](Index v) -> std::size_t { return v < n ? 1 : hierarchy[v - n].size; };

  // Leaves below a hierarchy node, in BFS order.
  auto leaves_of = [&](Index start, std::vector<bool>& ignore) {
    std::vector<Index> leaves;
    std::vector<Index> queue{start};
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const Index v = queue[head];
      ignore[v] = true;
      if (v < n) {
        leaves.push_back(v);
      } else {
        queue.push_back(hierarchy[v - n].left);
        queue.push_back(hierarchy[v - n].right);
      }
    }
    return leaves;
  };

  std::vector<Index> order{root};
  for (std::size_t head = 0; head < order.size(); ++head) {
    const Index v = order[head];
    if (v >= n) {
      order.push_back(hierarchy[v - n].left);
      order.push_back(hierarchy[v - n].right);
    }
  }

  std::vector<Index> relabel(2 * n - 1, 0);
  std::vector<bool> ignore(2 * n - 1, false);
  relabel[root] = n;
  Index next_label = n + 1;

  for (const Index v : order) {
    if (ignore[v] || v < n) continue;
    const Merge& m = hierarchy[v - n];
    const double lambda = lambda_of(m.distance);
    const std::size_t left_size = node_size(m.left);
    const std::size_t right_size = node_size(m.right);
    const bool left_big = left_size >= min_cluster_size;
    const bool right_big = right_size >= min_cluster_size;

    if (left_big && right_big) {
      relabel[m.left] = next_label++;
      tree.edges.push_back({relabel[v], relabel[m.left], lambda, left_size});
      relabel[m.right] = next_label++;
      tree.edges.push_back({relabel[v], relabel[m.right], lambda, right_size});
      continue;
    }
    for (const Index side : {m.left, m.right}) {
      const bool big = side == m.left ? left_big : right_big;
      if (big) {
        relabel[side] = relabel[v];
        continue;
      }
      for (const Index leaf : leaves_of(side, ignore)) {
        tree.edges.push_back({relabel[v], leaf, lambda, 1});
      }
    }
  }
  tree.num_nodes = next_label - n;
  return tree;
}

std::vector<double> cluster_stability(const CondensedTree& tree) {
  double max_finite = 0.0;
  for (const auto& e : tree.edges) {
    if (std::isfinite(e.lambda)) max_finite = std::max(max_finite, e.lambda);
  }
  const double cap = max_finite > 0.0 ? 2.0 * max_finite : 1.0;
  auto effective = [cap](double lambda) { return std::isfinite(lambda) ? lambda : cap; };

  const std::size_t n = tree.num_points;
  std::vector<double> birth(tree.num_nodes, 0.0);
  for (const auto& e : tree.edges) {
    if (e.child >= n) birth[e.child - n] = effective(e.lambda);
  }
  std::vector<double> stability(tree.num_nodes, 0.0);
  for (const auto& e : tree.edges) {
    const Index p = e.parent - n;
    stability[p] += (effective(e.lambda) - birth[p]) * static_cast<double>(e.child_size);
  }
  return stability;
}

IndexList ClusterResult::outliers() const {
  IndexList out;
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == kOutlier) out.push_back(i);
  }
  return out;
}

ClusterResult condense_and_select(const std::vector<Edge>& mst, std::size_t n, std::size_t min_cluster_size,
                                  std::size_t min_samples) {
  if (min_cluster_size < 2) throw Error(ErrorCode::InvalidConfig, "min_cluster_size must be >= 2");
  ClusterResult result;
  result.min_cluster_size = min_cluster_size;
  result.min_samples = min_samples;
  result.labels.assign(n, kOutlier);
  result.membership.assign(n, 0.0);
  if (n < 2) return result;

  const double max_weight =
      std::max_element(mst.begin(), mst.end(), [](const Edge& a, const Edge& b) { return a.weight < b.weight; })
          ->weight;
  if (max_weight == 0.0) {
    // All points coincide: the hierarchy has no structure, so the root is
    // the only candidate and is admitted when large enough.
    result.condensed_clusters = 1;
    if (n >= min_cluster_size) {
      result.labels.assign(n, 0);
      result.membership.assign(n, 1.0);
      IndexList all(n);
      std::iota(all.begin(), all.end(), Index{0});
      result.clusters.push_back(std::move(all));
      result.stability.push_back(0.0);
    }
    return result;
  }

  const CondensedTree tree = condense_tree(single_linkage(mst, n), min_cluster_size);
  result.condensed_clusters = tree.num_nodes;
  const std::size_t nodes = tree.num_nodes;
  std::vector<double> stability = cluster_stability(tree);

  std::vector<std::vector<Index>> child_clusters(nodes);
  std::vector<Index> parent_cluster(nodes, tree.root());
  std::vector<double> max_lambda(nodes, 0.0);
  std::vector<Index> point_parent(n, tree.root());
  std::vector<double> point_lambda(n, 0.0);
  for (const auto& e : tree.edges) {
    const Index p = e.parent - n;
    max_lambda[p] = std::max(max_lambda[p], e.lambda);
    if (e.child >= n) {
      child_clusters[p].push_back(e.child - n);
      parent_cluster[e.child - n] = e.parent;
    } else {
      point_parent[e.child] = e.parent;
      point_lambda[e.child] = e.lambda;
    }
  }

  // Excess of mass, leaves first; the root is never selected.
  std::vector<bool> selected(nodes, false);
  for (Index c = nodes - 1; c >= 1; --c) {
    double subtree = 0.0;
    for (const Index child : child_clusters[c]) subtree += stability[child];
    if (subtree > stability[c]) {
      stability[c] = subtree;
    } else {
      selected[c] = true;
      std::vector<Index> stack(child_clusters[c].begin(), child_clusters[c].end());
      while (!stack.empty()) {
        const Index d = stack.back();
        stack.pop_back();
        selected[d] = false;
        stack.insert(stack.end(), child_clusters[d].begin(), child_clusters[d].end());
      }
    }
  }

  std::vector<int> label_of(nodes, kOutlier);
  const std::vector<double> raw_stability = cluster_stability(tree);
  for (Index c = 1; c < nodes; ++c) {
    if (!selected[c]) continue;
    label_of[c] = static_cast<int>(result.clusters.size());
    result.clusters.emplace_back();
    result.stability.push_back(raw_stability[c]);
  }

  for (Index p = 0; p < n; ++p) {
    Index c = point_parent[p] - n;
    while (c != 0 && !selected[c]) c = parent_cluster[c] - n;
    if (c == 0) continue;
    const int label = label_of[c];
    result.labels[p] = label;
    result.clusters[static_cast<std::size_t>(label)].push_back(p);
    const double death = max_lambda[c];
    const double lambda = point_lambda[p];
    if (death == 0.0 || !std::isfinite(lambda)) {
      result.membership[p] = 1.0;
    } else {
      result.membership[p] = std::clamp(std::min(lambda, death) / death, 0.0, 1.0);
    }
  }
  return result;
}

ClusterResult hdbscan(const Matrix& x, const HdbscanParams& params) {
  if (params.min_cluster_size < 2) throw Error(ErrorCode::InvalidConfig, "min_cluster_size must be >= 2");
  if (params.min_samples < 1) throw Error(ErrorCode::InvalidConfig, "min_samples must be >= 1");
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 2 || n < params.min_cluster_size) {
    ClusterResult result;
    result.min_cluster_size = params.min_cluster_size;
    result.min_samples = params.min_samples;
    result.labels.assign(n, kOutlier);
    result.membership.assign(n, 0.0);
    result.condensed_clusters = n > 0 ? 1 : 0;
    return result;
  }
  const std::size_t k = std::min(params.min_samples, n - 1);
  const MutualReachability distances(x, k);
  auto result = condense_and_select(build_mst(distances), n, params.min_cluster_size, params.min_samples);
  return result;
}

}  // namespace coda::cluster
