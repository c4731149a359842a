#pragma once

#include "coda/embedding_io.hpp"
#include "coda/hdbscan.hpp"
#include "coda/kmeans.hpp"
#include "coda/rng.hpp"
#include "coda/types.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coda::ipc {

/// Which step of the matching scheme produced a representative. The
/// enumerator order is also the tie-break order when sorting S_r.
enum class Provenance { InitCluster = 0, Split = 1, Outlier = 2, ForcedSplit = 3 };

inline constexpr std::size_t kProvenanceCount = 4;

std::string_view to_string(Provenance p) noexcept;
Provenance parse_provenance(std::string_view name);

/// A live cluster together with its single representative.
struct LiveCluster {
  std::size_t id = 0;
  IndexList members;  // class-local point indices, ascending
  Index rep = 0;      // class-local point index
  Provenance provenance = Provenance::InitCluster;
};

/// One chosen representative, in class-local indexing.
struct Selection {
  Index point = 0;
  Provenance provenance = Provenance::InitCluster;
  std::size_t cluster_size = 0;
};

struct MatchDiagnostics {
  std::size_t initial_clusters = 0;
  std::size_t outliers = 0;
  std::size_t steps = 0;             // worklist pops plus outlier-clustering passes
  std::size_t clusters_created = 0;  // initial clusters plus every child and outlier cluster
  std::size_t splits = 0;            // Strategy 1 successes
  std::size_t forced_splits = 0;     // Strategy 3 successes
  std::size_t outlier_picks = 0;     // Strategy 2 representatives
  bool truncated = false;
  bool relaxed_worklist = false;     // Strategy 3 had to admit clusters below 2 * min_cluster_size
  bool outlier_fallback = false;     // Strategy 3 ran dry and the outlier pool closed the gap
  std::vector<std::size_t> unsplittable;  // cluster ids that resisted ForcedSplit down to size 2
};

/// Mutable state of the matching scheme for one class: the clusters C with
/// their representatives S (always |S| == |C|), the worklist W of cluster
/// ids, and the outlier pool.
class WorkState {
 public:
  /// `points` are the (reduced) coordinates the clustering ran on; the
  /// state keeps a reference, so they must outlive it.
  WorkState(const Matrix& points, const cluster::ClusterResult& initial,
            std::size_t min_samples = cluster::kDefaultMinSamples);

  const Matrix& points() const noexcept { return *points_; }
  const std::vector<LiveCluster>& clusters() const noexcept { return clusters_; }
  const std::vector<std::size_t>& worklist() const noexcept { return worklist_; }
  const IndexList& outliers() const noexcept { return outliers_; }
  std::size_t min_samples() const noexcept { return min_samples_; }
  std::size_t size() const noexcept { return clusters_.size(); }
  MatchDiagnostics& diagnostics() noexcept { return diagnostics_; }
  const MatchDiagnostics& diagnostics() const noexcept { return diagnostics_; }

  const LiveCluster* find(std::size_t id) const;
  bool contains(std::size_t id) const { return find(id) != nullptr; }

  /// W <- {c in C : |c| > threshold}
  void rebuild_worklist(std::size_t threshold);
  /// W <- {c in C : |c| >= min_size, not marked unsplittable}
  void rebuild_worklist_at_least(std::size_t min_size);
  void push_worklist(std::size_t id);
  /// Removes and returns the largest cluster in W (ties: smaller id).
  std::optional<std::size_t> pop_largest();

  void remove_cluster(std::size_t id);
  std::size_t add_cluster(IndexList members, Index rep, Provenance provenance);
  void mark_unsplittable(std::size_t id);
  bool is_unsplittable(std::size_t id) const;

 private:
  const Matrix* points_;
  std::vector<LiveCluster> clusters_;
  std::vector<std::size_t> worklist_;
  IndexList outliers_;
  std::size_t min_samples_;
  std::size_t next_id_ = 0;
  MatchDiagnostics diagnostics_;
};

/// Member with the highest membership probability; ties go to the smallest
/// index. Indices refer to the rows `result` was computed on.
Index pick_representative(const IndexList& members, const cluster::ClusterResult& result);

/// Representatives of the `ipc` largest clusters (ties: smaller id), all
/// InitCluster.
std::vector<Selection> truncate_to_ipc(const WorkState& state, std::size_t ipc);

/// SplitCluster: HDBSCAN inside the mother; with at least two sub-clusters,
/// their representatives seed every k=2 K-Means pair and the lowest-inertia
/// split replaces the mother. The chosen seed pair become the children's
/// representatives. Children larger than 2 * min_cluster_size join W.
/// Returns false (state untouched) when fewer than two sub-clusters appear.
bool split_cluster(WorkState& state, std::size_t mother_id, std::size_t min_cluster_size,
                   Provenance provenance = Provenance::Split);

/// ForcedSplit: retries split_cluster with min_size <- max(2, floor(0.75 *
/// min_size)) until it succeeds or a try at 2 fails. A total failure marks
/// the mother unsplittable and returns false.
bool forced_split(WorkState& state, std::size_t mother_id, std::size_t min_size,
                  std::vector<std::size_t>* schedule = nullptr);

/// Strategy 2: K-Means (k-means++ seeds from `rng`) over the outlier pool;
/// each centroid's nearest untaken outlier becomes a representative.
void cluster_outliers(WorkState& state, std::size_t k_needed, Rng& rng);

struct MatchResult {
  std::vector<Selection> selections;  // exactly ipc entries, canonical order
  MatchDiagnostics diagnostics;
};

/// Canonical S_r order: larger source cluster first, then provenance
/// (InitCluster < Split < Outlier < ForcedSplit), then point index.
void sort_selections(std::vector<Selection>& selections);

/// The complete post-processing scheme: truncation when M >= ipc; otherwise
/// Strategy 1 over W, then Strategy 2 if the outliers suffice, else
/// Strategy 3. If Strategy 3 runs out of splittable clusters while the
/// outliers now cover the gap, Strategy 2 finishes the job; otherwise
/// CannotReachIPC. `outlier_seed` drives the Strategy 2 seeding.
MatchResult match_ipc(const Matrix& points, const cluster::ClusterResult& result, std::size_t ipc,
                      std::size_t min_cluster_size, std::size_t min_samples, std::uint64_t outlier_seed);

/// Per-class output, bound back to the original embedding rows.
struct RepresentativeEntry {
  std::string sample_id;
  Index row = 0;            // row in the EmbeddingSet
  Eigen::VectorXf latent;   // original full-dimensional vector
  Provenance provenance = Provenance::InitCluster;
  std::size_t cluster_size = 0;
};

struct RepresentativeSet {
  int label = 0;
  std::size_t ipc = 0;
  std::vector<RepresentativeEntry> entries;
  MatchDiagnostics diagnostics;

  std::array<std::size_t, kProvenanceCount> provenance_counts() const;
};

RepresentativeSet bind(const io::EmbeddingSet& set, const io::ClassView& view, const MatchResult& match);

using SourceFractions = std::array<double, kProvenanceCount>;

/// Fraction of each provenance among all entries of the given sets.
SourceFractions source_fractions(const std::vector<RepresentativeSet>& sets);

/// One row of fractions per grid point.
std::vector<SourceFractions> source_report(const std::vector<std::vector<RepresentativeSet>>& grid);

}  // namespace coda::ipc
