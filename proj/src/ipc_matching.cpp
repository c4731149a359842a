#include "coda/ipc_matching.hpp"

#include "coda/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace coda::ipc {

std::string_view to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::InitCluster: return "InitCluster";
    case Provenance::Split: return "Split";
    case Provenance::Outlier: return "Outlier";
    case Provenance::ForcedSplit: return "ForcedSplit";
  }
  return "InitCluster";
}

Provenance parse_provenance(std::string_view name) {
  for (std::size_t i = 0; i < kProvenanceCount; ++i) {
    const auto p = static_cast<Provenance>(i);
    if (to_string(p) == name) return p;
  }
  throw Error(ErrorCode::MalformedData, "unknown provenance '" + std::string(name) + "'");
}

WorkState::WorkState(const Matrix& points, const cluster::ClusterResult& initial, std::size_t min_samples)
    : points_(&points), outliers_(initial.outliers()), min_samples_(min_samples) {
  if (static_cast<std::size_t>(points.rows()) != initial.num_points()) {
    throw Error(ErrorCode::DimMismatch, "cluster result does not match the point count");
  }
  for (const auto& members : initial.clusters) {
    add_cluster(members, pick_representative(members, initial), Provenance::InitCluster);
  }
  diagnostics_.initial_clusters = initial.num_clusters();
  diagnostics_.outliers = outliers_.size();
}

const LiveCluster* WorkState::find(std::size_t id) const {
  const auto it = std::find_if(clusters_.begin(), clusters_.end(), [id](const LiveCluster& c) { return c.id == id; });
  return it == clusters_.end() ? nullptr : &*it;
}

void WorkState::rebuild_worklist(std::size_t threshold) {
  worklist_.clear();
  for (const auto& c : clusters_) {
    if (c.members.size() > threshold) worklist_.push_back(c.id);
  }
}

void WorkState::rebuild_worklist_at_least(std::size_t min_size) {
  worklist_.clear();
  for (const auto& c : clusters_) {
    if (c.members.size() >= min_size && !is_unsplittable(c.id)) worklist_.push_back(c.id);
  }
}

void WorkState::push_worklist(std::size_t id) {
  if (std::find(worklist_.begin(), worklist_.end(), id) == worklist_.end()) worklist_.push_back(id);
}

std::optional<std::size_t> WorkState::pop_largest() {
  if (worklist_.empty()) return std::nullopt;
  auto best = worklist_.end();
  std::size_t best_size = 0;
  for (auto it = worklist_.begin(); it != worklist_.end(); ++it) {
    const LiveCluster* c = find(*it);
    const std::size_t size = c ? c->members.size() : 0;
    if (best == worklist_.end() || size > best_size || (size == best_size && *it < *best)) {
      best = it;
      best_size = size;
    }
  }
  const std::size_t id = *best;
  worklist_.erase(best);
  ++diagnostics_.steps;
  return id;
}

void WorkState::remove_cluster(std::size_t id) {
  std::erase_if(clusters_, [id](const LiveCluster& c) { return c.id == id; });
  std::erase(worklist_, id);
}

std::size_t WorkState::add_cluster(IndexList members, Index rep, Provenance provenance) {
  const std::size_t id = next_id_++;
  clusters_.push_back(LiveCluster{id, std::move(members), rep, provenance});
  ++diagnostics_.clusters_created;
  return id;
}

void WorkState::mark_unsplittable(std::size_t id) {
  if (!is_unsplittable(id)) diagnostics_.unsplittable.push_back(id);
}

bool WorkState::is_unsplittable(std::size_t id) const {
  const auto& u = diagnostics_.unsplittable;
  return std::find(u.begin(), u.end(), id) != u.end();
}

Index pick_representative(const IndexList& members, const cluster::ClusterResult& result) {
  if (members.empty()) throw Error(ErrorCode::EmptyCluster, "cannot pick a representative of an empty cluster");
  Index best = members.front();
  for (const Index m : members) {
    const double p = result.membership.at(m);
    const double q = result.membership.at(best);
    if (p > q || (p == q && m < best)) best = m;
  }
  return best;
}

std::vector<Selection> truncate_to_ipc(const WorkState& state, std::size_t ipc) {
  std::vector<const LiveCluster*> order;
  for (const auto& c : state.clusters()) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const LiveCluster* a, const LiveCluster* b) {
    if (a->members.size() != b->members.size()) return a->members.size() > b->members.size();
    return a->id < b->id;
  });
  std::vector<Selection> out;
  for (std::size_t i = 0; i < std::min(ipc, order.size()); ++i) {
    out.push_back(Selection{order[i]->rep, Provenance::InitCluster, order[i]->members.size()});
  }
  return out;
}

bool split_cluster(WorkState& state, std::size_t mother_id, std::size_t min_cluster_size, Provenance provenance) {
  const LiveCluster* mother = state.find(mother_id);
  if (mother == nullptr) throw Error(ErrorCode::EmptyCluster, "cluster " + std::to_string(mother_id) + " is not live");
  const IndexList members = mother->members;
  const Index mother_rep = mother->rep;
  const Matrix local = gather_rows(state.points(), members);

  const auto sub = cluster::hdbscan(local, {min_cluster_size, state.min_samples()});
  if (sub.num_clusters() < 2) return false;

  Matrix candidates(static_cast<Eigen::Index>(sub.num_clusters()), local.cols());
  IndexList candidate_rows;
  // The mother's representative leaves S with her, so it is not eligible
  // again unless it is the only member of its sub-cluster.
  for (std::size_t k = 0; k < sub.num_clusters(); ++k) {
    IndexList eligible;
    for (const Index m : sub.clusters[k]) {
      if (members[m] != mother_rep) eligible.push_back(m);
    }
    const Index r = pick_representative(eligible.empty() ? sub.clusters[k] : eligible, sub);
    candidate_rows.push_back(r);
    candidates.row(static_cast<Eigen::Index>(k)) = local.row(static_cast<Eigen::Index>(r));
  }

  kmeans::PairSplit split;
  try {
    split = kmeans::best_pair_split(local, candidates);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::TooFewCandidates) return false;
    throw;
  }

  // Each seed stays in the child it seeded, so a representative is always a
  // member of its own cluster and can never be picked again elsewhere.
  auto assignment = split.outcome.assignment;
  assignment[candidate_rows[split.pair.first]] = 0;
  assignment[candidate_rows[split.pair.second]] = 1;
  std::array<IndexList, 2> children;
  for (std::size_t i = 0; i < members.size(); ++i) children[assignment[i]].push_back(members[i]);
  const std::array<Index, 2> reps = {members[candidate_rows[split.pair.first]],
                                     members[candidate_rows[split.pair.second]]};

  state.remove_cluster(mother_id);
  for (std::size_t c = 0; c < 2; ++c) {
    const std::size_t size = children[c].size();
    const std::size_t id = state.add_cluster(std::move(children[c]), reps[c], provenance);
    if (size > 2 * min_cluster_size) state.push_worklist(id);
  }
  return true;
}

bool forced_split(WorkState& state, std::size_t mother_id, std::size_t min_size, std::vector<std::size_t>* schedule) {
  while (true) {
    if (schedule) schedule->push_back(min_size);
    if (split_cluster(state, mother_id, min_size, Provenance::ForcedSplit)) return true;
    if (min_size <= 2) break;
    min_size = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(static_cast<double>(min_size) * 0.75)));
  }
  state.mark_unsplittable(mother_id);
  return false;
}

void cluster_outliers(WorkState& state, std::size_t k_needed, Rng& rng) {
  const IndexList& pool = state.outliers();
  if (k_needed == 0) return;
  if (pool.size() < k_needed) {
    throw Error(ErrorCode::InsufficientOutliers, std::to_string(pool.size()) + " outliers for " +
                                                     std::to_string(k_needed) + " representatives");
  }
  ++state.diagnostics().steps;
  if (pool.size() == k_needed) {
    for (const Index p : pool) state.add_cluster({p}, p, Provenance::Outlier);
    state.diagnostics().outlier_picks += k_needed;
    return;
  }

  const Matrix x = gather_rows(state.points(), pool);
  const Matrix seeds = kmeans::plus_plus_seeds(x, k_needed, rng);
  const auto outcome = kmeans::kmeans(x, seeds);
  const auto k = static_cast<std::size_t>(outcome.centroids.rows());
  std::vector<IndexList> groups(k);
  for (std::size_t i = 0; i < pool.size(); ++i) groups[outcome.assignment[i]].push_back(pool[i]);

  std::vector<bool> taken(pool.size(), false);
  for (std::size_t c = 0; c < k_needed; ++c) {
    const std::size_t centroid = c % k;
    const std::size_t local = kmeans::nearest_real_point(outcome.centroids.row(static_cast<Eigen::Index>(centroid)).transpose(), x, taken);
    taken[local] = true;
    // Extra picks (only when the pool has fewer distinct points than
    // k_needed) stand alone.
    IndexList members = c < k ? groups[c] : IndexList{pool[local]};
    state.add_cluster(std::move(members), pool[local], Provenance::Outlier);
  }
  state.diagnostics().outlier_picks += k_needed;
}

void sort_selections(std::vector<Selection>& selections) {
  std::sort(selections.begin(), selections.end(), [](const Selection& a, const Selection& b) {
    if (a.cluster_size != b.cluster_size) return a.cluster_size > b.cluster_size;
    if (a.provenance != b.provenance) return a.provenance < b.provenance;
    return a.point < b.point;
  });
}

MatchResult match_ipc(const Matrix& points, const cluster::ClusterResult& result, std::size_t ipc,
                      std::size_t min_cluster_size, std::size_t min_samples, std::uint64_t outlier_seed) {
  if (ipc < 1) throw Error(ErrorCode::InvalidConfig, "ipc must be >= 1");
  if (static_cast<std::size_t>(points.rows()) < ipc) {
    throw Error(ErrorCode::TooFewPoints, "class has " + std::to_string(points.rows()) + " points, ipc is " +
                                             std::to_string(ipc));
  }
  WorkState state(points, result, min_samples);
  MatchResult out;

  if (state.size() >= ipc) {
    out.selections = truncate_to_ipc(state, ipc);
    state.diagnostics().truncated = true;
  } else {
    // Strategy 1: split viable clusters at the configured granularity.
    state.rebuild_worklist(2 * min_cluster_size);
    while (state.size() < ipc) {
      const auto mother = state.pop_largest();
      if (!mother) break;
      if (split_cluster(state, *mother, min_cluster_size, Provenance::Split)) ++state.diagnostics().splits;
    }
    if (state.size() < ipc) {
      const std::size_t k_needed = ipc - state.size();
      if (state.outliers().size() >= k_needed) {
        // Strategy 2: close the gap from the outlier pool in one pass.
        Rng rng(outlier_seed);
        cluster_outliers(state, k_needed, rng);
      } else {
        // Strategy 3: relax min_cluster_size per mother until it splits.
        state.rebuild_worklist(2 * min_cluster_size);
        while (state.size() < ipc) {
          auto mother = state.pop_largest();
          if (!mother) {
            // Nothing viable is left at 2 * min_cluster_size; admit any
            // cluster ForcedSplit could still split at its floor of 2.
            // Terminates: failures are marked unsplittable, successes grow S.
            state.diagnostics().relaxed_worklist = true;
            state.rebuild_worklist_at_least(4);
            mother = state.pop_largest();
          }
          if (!mother && state.outliers().size() >= ipc - state.size()) {
            // Every cluster resisted splitting, but the gap has shrunk to what
            // the outlier pool can cover: close it as Strategy 2 would.
            state.diagnostics().outlier_fallback = true;
            Rng rng(outlier_seed);
            cluster_outliers(state, ipc - state.size(), rng);
            break;
          }
          if (!mother) {
            throw Error(ErrorCode::CannotReachIPC,
                        "all strategies exhausted at " + std::to_string(state.size()) + "/" + std::to_string(ipc) +
                            " representatives (" + std::to_string(state.outliers().size()) + " outliers, " +
                            std::to_string(state.diagnostics().unsplittable.size()) + " unsplittable clusters)");
          }
          if (forced_split(state, *mother, min_cluster_size)) ++state.diagnostics().forced_splits;
        }
      }
    }
    for (const auto& c : state.clusters()) out.selections.push_back(Selection{c.rep, c.provenance, c.members.size()});
  }

  sort_selections(out.selections);
  out.diagnostics = state.diagnostics();
  return out;
}

std::array<std::size_t, kProvenanceCount> RepresentativeSet::provenance_counts() const {
  std::array<std::size_t, kProvenanceCount> counts{};
  for (const auto& e : entries) ++counts[static_cast<std::size_t>(e.provenance)];
  return counts;
}

RepresentativeSet bind(const io::EmbeddingSet& set, const io::ClassView& view, const MatchResult& match) {
  RepresentativeSet out;
  out.label = view.label;
  out.ipc = match.selections.size();
  out.diagnostics = match.diagnostics;
  std::unordered_set<Index> seen;
  for (const auto& s : match.selections) {
    const Index row = view.rows.at(s.point);
    if (!seen.insert(row).second) {
      throw Error(ErrorCode::CannotReachIPC, "row " + std::to_string(row) + " selected twice");
    }
    out.entries.push_back(RepresentativeEntry{set.sample_ids()[row], row,
                                              set.vectors().row(static_cast<Eigen::Index>(row)).transpose(),
                                              s.provenance, s.cluster_size});
  }
  return out;
}

SourceFractions source_fractions(const std::vector<RepresentativeSet>& sets) {
  SourceFractions f{};
  std::size_t total = 0;
  for (const auto& s : sets) {
    const auto counts = s.provenance_counts();
    for (std::size_t i = 0; i < kProvenanceCount; ++i) f[i] += static_cast<double>(counts[i]);
    total += s.entries.size();
  }
  if (total > 0) {
    for (auto& v : f) v /= static_cast<double>(total);
  }
  return f;
}

std::vector<SourceFractions> source_report(const std::vector<std::vector<RepresentativeSet>>& grid) {
  std::vector<SourceFractions> out;
  out.reserve(grid.size());
  for (const auto& sets : grid) out.push_back(source_fractions(sets));
  return out;
}

}  // namespace coda::ipc
