#include "coda/error.hpp"
#include "coda/hdbscan.hpp"
#include "coda/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <map>

using namespace coda;
using namespace coda::cluster;

namespace {

Matrix blobs(const std::vector<Vector>& centers, std::size_t per, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  const auto d = centers.front().size();
  Matrix x(static_cast<Eigen::Index>(centers.size() * per), d);
  Eigen::Index r = 0;
  for (const auto& c : centers)
    for (std::size_t i = 0; i < per; ++i, ++r)
      for (Eigen::Index k = 0; k < d; ++k) x(r, k) = c(k) + sigma * rng.normal();
  return x;
}

Matrix random_points(std::size_t n, std::size_t d, Rng& rng) {
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index k = 0; k < x.cols(); ++k) x(i, k) = rng.uniform(-1.0, 1.0);
  return x;
}

void check_invariants(const ClusterResult& r) {
  std::vector<int> seen(r.num_points(), 0);
  for (std::size_t c = 0; c < r.num_clusters(); ++c) {
    CHECK(r.clusters[c].size() >= r.min_cluster_size);
    for (auto p : r.clusters[c]) {
      CHECK(r.labels[p] == static_cast<int>(c));
      ++seen[p];
    }
  }
  for (std::size_t p = 0; p < r.num_points(); ++p) {
    CHECK(r.membership[p] >= 0.0);
    CHECK(r.membership[p] <= 1.0);
    if (r.labels[p] == kOutlier) {
      CHECK(r.membership[p] == 0.0);
      CHECK(seen[p] == 0);
    } else {
      CHECK(r.labels[p] < static_cast<int>(r.num_clusters()));
      CHECK(seen[p] == 1);
    }
  }
}

/// Fraction of clustered points whose cluster's majority mode is their mode.
double agreement(const ClusterResult& r, const std::vector<int>& truth) {
  std::size_t good = 0, total = 0;
  for (const auto& members : r.clusters) {
    std::map<int, std::size_t> votes;
    for (auto p : members) ++votes[truth[p]];
    std::size_t best = 0;
    for (auto& [m, v] : votes) best = std::max(best, v);
    good += best;
    total += members.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(good) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("core distances") {
  SUBCASE("collinear points, one neighbor") {
    Matrix x(3, 1);
    x << 0.0, 1.0, 2.0;
    CHECK(core_distances(x, 1) == std::vector<double>{1.0, 1.0, 1.0});
  }
  SUBCASE("matches an exhaustive scan") {
    Matrix x(4, 2);
    x << 0.0, 0.0, 3.0, 1.0, -2.0, 5.0, 0.5, 0.25;
    const auto got = core_distances(x, 2);
    const auto want = oracle::brute_core(x, 2);
    for (int i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-15));
    Rng rng(77);
    const Matrix y = random_points(50, 5, rng);
    const auto got3 = core_distances(y, 3);
    const auto want3 = oracle::brute_core(y, 3);
    for (int i = 0; i < 50; ++i) CHECK(got3[i] == doctest::Approx(want3[i]).epsilon(1e-12));
  }
  SUBCASE("too few points") {
    try {
      core_distances(Matrix::Zero(2, 2), 3);
      FAIL("expected TooFewPoints");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TooFewPoints);
    }
  }
}

TEST_CASE("mutual reachability") {
  SUBCASE("coincident points take the larger core distance") {
    Matrix x(4, 1);
    x << 0.0, 0.0, 3.0, 10.0;
    const MutualReachability m(x, 2);
    // core = [3, 3, 7, 10]
    CHECK(m(0, 1) == 3.0);
  }
  SUBCASE("matches direct recomputation") {
    Rng rng(4);
    const Matrix x = random_points(10, 3, rng);
    const Matrix d = MutualReachability(x, 3).dense();
    const Matrix want = oracle::brute_mreach(x, 3);
    CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((d - want).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j)
        if (i != j) CHECK(d(i, j) >= oracle::euclid(x, i, j));
  }
  SUBCASE("hand evaluation with one neighbor") {
    Matrix x(3, 1);
    x << 0.0, 10.0, 30.0;
    const MutualReachability m(x, 1);
    // core = [10, 10, 20]
    CHECK(m(0, 1) == 10.0);
    CHECK(m(0, 2) == 30.0);
    CHECK(m(1, 2) == 20.0);
  }
}

TEST_CASE("minimum spanning tree") {
  SUBCASE("three points") {
    Matrix d(3, 3);
    d << 0, 1, 3, 1, 0, 2, 3, 2, 0;
    const auto mst = build_mst(d);
    REQUIRE(mst.size() == 2);
    double total = 0.0;
    for (const auto& e : mst) total += e.weight;
    CHECK(total == 3.0);
  }
  SUBCASE("weight equals exhaustive enumeration of spanning trees") {
    Rng rng(12);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = 3 + static_cast<std::size_t>(trial % 4);  // 3..6
      Matrix d = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      std::vector<std::pair<int, int>> edges;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          d(i, j) = d(j, i) = 1.0 + std::floor(rng.uniform() * 5.0);  // ties on purpose
          edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
      double best = std::numeric_limits<double>::infinity();
      const std::size_t m = edges.size();
      for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != n - 1) continue;
        std::vector<std::size_t> parent(n);
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        std::function<std::size_t(std::size_t)> find = [&](std::size_t v) { return parent[v] == v ? v : parent[v] = find(parent[v]); };
        bool tree = true;
        double w = 0.0;
        for (std::size_t e = 0; e < m && tree; ++e) {
          if (!(mask >> e & 1u)) continue;
          const auto a = find(static_cast<std::size_t>(edges[e].first)), b = find(static_cast<std::size_t>(edges[e].second));
          if (a == b) tree = false;
          parent[a] = b;
          w += d(edges[e].first, edges[e].second);
        }
        if (tree) best = std::min(best, w);
      }
      double total = 0.0;
      for (const auto& e : build_mst(d)) total += e.weight;
      CHECK(total == best);
      CHECK(total == oracle::kruskal_weight(d));
    }
  }
  SUBCASE("equal weights resolve by index order") {
    Matrix d = Matrix::Ones(4, 4);
    d.diagonal().setZero();
    auto mst = build_mst(d);
    std::sort(mst.begin(), mst.end(), edge_less);
    REQUIRE(mst.size() == 3);
    CHECK(mst[0].a == 0);
    CHECK(mst[0].b == 1);
    CHECK(mst[1].a == 0);
    CHECK(mst[1].b == 2);
    CHECK(mst[2].a == 0);
    CHECK(mst[2].b == 3);
  }
}

TEST_CASE("single-linkage heights match the naive agglomeration") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(rng.below(40));
    const Matrix x = random_points(n, 2 + static_cast<std::size_t>(rng.below(3)), rng);
    const MutualReachability mr(x, 3);
    const auto merges = single_linkage(build_mst(mr), n);
    const auto want = oracle::naive_heights(mr.dense());
    REQUIRE(merges.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) CHECK(merges[k].distance == doctest::Approx(want[k]).epsilon(1e-12));
    CHECK(merges.back().size == n);
  }
}

TEST_CASE("flat clusters match the recursive reference") {
  Rng rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 8 + static_cast<std::size_t>(rng.below(57));
    // Loose groups so that non-trivial hierarchies appear.
    Matrix x = random_points(n, 2, rng);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) += 3.0 * static_cast<double>(i % 3);
    const std::size_t mcs = 2 + static_cast<std::size_t>(rng.below(6));
    const MutualReachability mr(x, 3);
    const auto got = condense_and_select(build_mst(mr), n, mcs, 3);
    const auto want = oracle::reference_hdbscan(mr.dense(), mcs);
    CHECK(oracle::canonical_labels(got.labels) == want.labels);
    check_invariants(got);
  }
}

TEST_CASE("two separated blobs give two clusters and no outliers") {
  const Matrix x = blobs({Vector::Zero(2), Vector::Constant(2, 50.0)}, 10, 1.0, 3);
  const auto r = hdbscan(x, {5, 3});
  CHECK(r.num_clusters() == 2);
  CHECK(r.outliers().empty());
  check_invariants(r);
  const auto want = oracle::reference_hdbscan(MutualReachability(x, 3).dense(), 5);
  CHECK(want.clusters == 2);
}

TEST_CASE("too few points for a cluster gives all outliers") {
  Matrix x(4, 2);
  x << 0, 0, 5, 5, -3, 8, 9, -1;
  const auto r = hdbscan(x, {5, 3});
  CHECK(r.num_clusters() == 0);
  CHECK(r.outliers().size() == 4);
}

TEST_CASE("a single blob is never promoted to a cluster") {
  // The root of the condensed tree is not selectable, so one blob plus far
  // points yields no clusters; every point goes to the outlier pool.
  Matrix x = blobs({Vector::Zero(3)}, 30, 1.0, 17);
  x.conservativeResize(33, 3);
  x.row(30) << 100.0, 0.0, 0.0;
  x.row(31) << 0.0, -120.0, 0.0;
  x.row(32) << 0.0, 0.0, 140.0;
  const auto r = hdbscan(x, {10, 3});
  CHECK(r.num_clusters() == 0);
  CHECK(r.outliers().size() == 33);
  CHECK(oracle::reference_hdbscan(MutualReachability(x, 3).dense(), 10).clusters == 0);
}

TEST_CASE("two blobs with three far points") {
  Matrix x = blobs({Vector::Zero(3), Vector::Constant(3, 40.0)}, 30, 1.0, 17);
  x.conservativeResize(63, 3);
  x.row(60) << 100.0, 0.0, 0.0;
  x.row(61) << 0.0, -120.0, 0.0;
  x.row(62) << 0.0, 0.0, 140.0;
  const auto r = hdbscan(x, {10, 3});
  CHECK(r.num_clusters() == 2);
  for (int i = 60; i < 63; ++i) CHECK(r.labels[static_cast<std::size_t>(i)] == kOutlier);
  CHECK(oracle::canonical_labels(r.labels) == oracle::reference_hdbscan(MutualReachability(x, 3).dense(), 10).labels);
  check_invariants(r);
}

TEST_CASE("planted five-mode mixture is recovered") {
  std::vector<Vector> centers;
  Rng rng(99);
  for (int m = 0; m < 5; ++m) {
    Vector c(8);
    for (int k = 0; k < 8; ++k) c(k) = rng.uniform(-40.0, 40.0);
    centers.push_back(c);
  }
  const Matrix x = blobs(centers, 200, 1.0, 5);
  std::vector<int> truth;
  for (int m = 0; m < 5; ++m) truth.insert(truth.end(), 200, m);
  const auto r = hdbscan(x, {50, 3});
  CHECK(r.num_clusters() == 5);
  CHECK(agreement(r, truth) >= 0.99);
  check_invariants(r);

  // Larger min_cluster_size never yields more clusters here.
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (std::size_t mcs : {5, 10, 20, 50, 100, 200, 400, 1000}) {
    const auto rr = hdbscan(x, {mcs, 3});
    CHECK(rr.num_clusters() <= previous);
    previous = rr.num_clusters();
  }
}

TEST_CASE("identical points form a single cluster") {
  const Matrix x = Matrix::Constant(12, 3, 2.5);
  const auto r = hdbscan(x, {5, 3});
  CHECK(r.num_clusters() == 1);
  CHECK(r.clusters[0].size() == 12);
  CHECK(r.outliers().empty());
}

TEST_CASE("planted far off-class points are outliers") {
  Matrix x = blobs({Vector::Zero(6)}, 300, 1.0, 21);
  x.conservativeResize(310, 6);
  Rng rng(22);
  for (int i = 0; i < 10; ++i) {
    Vector dir(6);
    for (int k = 0; k < 6; ++k) dir(k) = rng.normal();
    x.row(300 + i) = (25.0 * dir.normalized()).transpose();
  }
  const auto r = hdbscan(x, {20, 3});
  for (int i = 300; i < 310; ++i) CHECK(r.labels[static_cast<std::size_t>(i)] == kOutlier);
}

TEST_CASE("identical input gives identical output") {
  const Matrix x = blobs({Vector::Zero(2), Vector::Constant(2, 9.0)}, 40, 2.0, 6);
  const auto a = hdbscan(x, {8, 3});
  const auto b = hdbscan(x, {8, 3});
  CHECK(a.labels == b.labels);
  CHECK(a.membership == b.membership);
  CHECK(a.stability == b.stability);
}

TEST_CASE("invalid min_cluster_size") {
  CHECK_THROWS_AS(hdbscan(Matrix::Zero(5, 2), {1, 3}), Error);
}
