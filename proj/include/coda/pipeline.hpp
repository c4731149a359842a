#pragma once

#include "coda/benchmark.hpp"
#include "coda/diffusion.hpp"
#include "coda/embedding_io.hpp"
#include "coda/evaluation.hpp"
#include "coda/hdbscan.hpp"
#include "coda/ipc_matching.hpp"
#include "coda/preprocess.hpp"

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace coda::pipeline {

using Json = nlohmann::json;
namespace fs = std::filesystem;

/// Version stamp written into every artifact.
std::string version_string();

/// One record for the whole run. Flags and config files both populate it.
struct RunConfig {
  fs::path embeddings;
  io::Format format = io::Format::Binary;
  fs::path labels;   // empty: <embeddings>.labels.json
  fs::path model;    // score-model JSON; empty: fitted from the embeddings
  fs::path representatives;  // manifest consumed by align; empty: <out>/representatives.json
  fs::path train;    // manifest consumed by eval
  fs::path test;     // held-out embeddings
  fs::path grid;     // directory of run outputs for report
  fs::path out;      // output directory (or file for report)

  std::size_t ipc = 10;
  std::size_t min_cluster_size = 20;
  std::size_t min_samples = cluster::kDefaultMinSamples;
  preprocess::Kind preprocess = preprocess::Kind::Pca;
  std::size_t dim = preprocess::kDefaultDim;

  double gamma = 0.1;
  std::size_t pis = 5;
  std::size_t steps = 50;
  double cfg_scale = 5.0;
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::LinearBeta;

  eval::ProxyKind proxy = eval::ProxyKind::NearestCentroid;
  std::size_t knn_k = 1;

  std::uint64_t seed = 0;
  bench::BenchmarkSpec bench;

  /// Numeric ranges only; path checks belong to the stage that reads them.
  void validate() const;
  Json to_json() const;
};

/// Discovery output for one class.
struct ClassDiscovery {
  ipc::RepresentativeSet representatives;
  cluster::ClusterResult clusters;  // initial HDBSCAN result, in class-local row order
  std::size_t reduced_dim = 0;
};

/// Per-class PCA (dim clamped to what the class supports), HDBSCAN, then
/// IPC matching. A class whose points all coincide skips the projection.
ClassDiscovery discover_class(const io::EmbeddingSet& set, int label, const RunConfig& config);

std::vector<ClassDiscovery> discover(const io::EmbeddingSet& set, const RunConfig& config);

/// Representatives of all classes flattened in manifest order.
io::EmbeddingSet representative_embeddings(const std::vector<ipc::RepresentativeSet>& sets);

/// Baseline selectors over the same classes.
enum class Baseline { Random, KMeans };
std::vector<Index> baseline_rows(const io::EmbeddingSet& set, int label, std::size_t ipc, Baseline kind,
                                 std::uint64_t seed);

diffusion::GuidanceConfig guidance_config(const RunConfig& config);

/// One guided trajectory per representative; prototypes are the
/// representatives' full-dimensional vectors.
std::vector<diffusion::GuidedSampleSet> align(const diffusion::ScoreModel& model,
                                              const std::vector<ipc::RepresentativeSet>& sets,
                                              const RunConfig& config);

io::EmbeddingSet aligned_embeddings(const std::vector<diffusion::GuidedSampleSet>& sets);

/// Moment-matched diagonal Gaussian per class; the prior is their
/// count-weighted marginal.
diffusion::ScoreModel fit_score_model(const io::EmbeddingSet& set);

Json score_model_to_json(const diffusion::ScoreModel& model);
diffusion::ScoreModel score_model_from_json(const Json& json);

eval::EvalReport evaluate_sets(const io::EmbeddingSet& train, const io::EmbeddingSet& test, const RunConfig& config);

// Artifact documents. Every document carries "version" and "config".
Json representatives_manifest(const std::vector<ClassDiscovery>& classes, const RunConfig& config,
                              const std::string& latents_file);
Json clusters_report(const std::vector<ClassDiscovery>& classes, const RunConfig& config);
Json aligned_manifest(const std::vector<diffusion::GuidedSampleSet>& sets,
                      const std::vector<ipc::RepresentativeSet>& prototypes, const RunConfig& config,
                      const std::string& latents_file);
Json eval_report_json(const eval::EvalReport& report, const Json& provenance, const RunConfig& config,
                      std::optional<double> frechet = std::nullopt);

/// Reads a manifest and the latent file it names (relative to the manifest).
io::EmbeddingSet load_manifest_latents(const fs::path& manifest_path);

/// Representative sets reconstructed from a representatives manifest and its
/// latents, for the align stage.
std::vector<ipc::RepresentativeSet> load_representatives(const fs::path& manifest_path);

/// Serialization with a trailing newline; identical documents give
/// identical bytes.
void write_json(const fs::path& path, const Json& json);
Json read_json(const fs::path& path);

// Stages as run by the command line. Each writes into config.out.
std::vector<ClassDiscovery> run_discover(const RunConfig& config);
std::vector<diffusion::GuidedSampleSet> run_align(const RunConfig& config);
eval::EvalReport run_eval(const RunConfig& config);
eval::EvalReport run_pipeline(const RunConfig& config);
void run_bench(const RunConfig& config);

/// CSV with header min_cluster_size,accuracy,InitCluster,Split,Outlier,ForcedSplit;
/// one row per grid subdirectory holding representatives.json and eval.json,
/// ordered by min_cluster_size.
std::string grid_report(const fs::path& grid);

inline constexpr const char* kRepresentativesManifest = "representatives.json";
inline constexpr const char* kRepresentativesLatents = "representatives.bin";
inline constexpr const char* kClustersReport = "clusters.json";
inline constexpr const char* kAlignedManifest = "aligned.json";
inline constexpr const char* kAlignedLatents = "aligned.bin";
inline constexpr const char* kEvalReport = "eval.json";

}  // namespace coda::pipeline
