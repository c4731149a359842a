#include "coda/pipeline.hpp"

#include "coda/error.hpp"
#include "coda/kmeans.hpp"
#include "coda/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <set>
#include <sstream>
#include <utility>

#ifndef CODA_VERSION
#define CODA_VERSION "0.0.0"
#endif
#ifndef CODA_GIT_DESCRIBE
#define CODA_GIT_DESCRIBE "unknown"
#endif

namespace coda::pipeline {
namespace {

Matrix reduce_class(const Matrix& x, const RunConfig& config, std::size_t& reduced_dim) {
  if (config.preprocess == preprocess::Kind::None) {
    reduced_dim = static_cast<std::size_t>(x.cols());
    return x;
  }
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = std::min({config.dim, static_cast<std::size_t>(x.cols()), n});
  try {
    const auto reducer = preprocess::fit_pca(x, d);
    reduced_dim = reducer.out_dim();
    return preprocess::transform(reducer, x);
  } catch (const Error& e) {
    // Coincident or single-row classes have no principal directions.
    if (e.code() != ErrorCode::DegenerateInput) throw;
    reduced_dim = static_cast<std::size_t>(x.cols());
    return x;
  }
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Json fractions_json(const ipc::SourceFractions& f) {
  Json j = Json::object();
  for (std::size_t p = 0; p < ipc::kProvenanceCount; ++p) {
    j[std::string(ipc::to_string(static_cast<ipc::Provenance>(p)))] = f[p];
  }
  return j;
}

Json diagnostics_json(const ipc::MatchDiagnostics& d) {
  return Json{{"initial_clusters", d.initial_clusters}, {"outliers", d.outliers},
              {"steps", d.steps},                       {"clusters_created", d.clusters_created},
              {"splits", d.splits},                     {"forced_splits", d.forced_splits},
              {"outlier_picks", d.outlier_picks},       {"truncated", d.truncated},
              {"relaxed_worklist", d.relaxed_worklist}, {"outlier_fallback", d.outlier_fallback},
              {"unsplittable", d.unsplittable}};
}

Json mixture_json(const diffusion::Mixture& m) {
  Json comps = Json::array();
  for (const auto& c : m.components) {
    comps.push_back({{"weight", c.weight},
                     {"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                     {"variance", std::vector<double>(c.variance.data(), c.variance.data() + c.variance.size())}});
  }
  return comps;
}

diffusion::Mixture mixture_from_json(const Json& comps) {
  diffusion::Mixture m;
  for (const auto& c : comps) {
    const auto mean = c.at("mean").get<std::vector<double>>();
    const auto var = c.at("variance").get<std::vector<double>>();
    m.components.push_back({c.at("weight").get<double>(),
                            Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                            Eigen::Map<const Vector>(var.data(), static_cast<Eigen::Index>(var.size()))});
  }
  return m;
}

std::vector<ipc::RepresentativeSet> representative_sets(const std::vector<ClassDiscovery>& classes) {
  std::vector<ipc::RepresentativeSet> out;
  out.reserve(classes.size());
  for (const auto& c : classes) out.push_back(c.representatives);
  return out;
}

io::EmbeddingSet load_input(const RunConfig& config) {
  if (config.embeddings.empty()) throw Error(ErrorCode::InvalidConfig, "--embeddings is required");
  std::optional<fs::path> labels;
  if (!config.labels.empty()) labels = config.labels;
  return io::load_embeddings(config.embeddings, config.format, labels);
}

diffusion::ScoreModel load_model(const RunConfig& config) {
  if (!config.model.empty()) return score_model_from_json(read_json(config.model));
  if (config.embeddings.empty()) {
    throw Error(ErrorCode::InvalidConfig, "align needs --model or --embeddings to fit a score model");
  }
  return fit_score_model(load_input(config));
}

// Referenced inputs must exist before a stage does any work.
void require_inputs(std::initializer_list<std::pair<const char*, const fs::path*>> inputs) {
  for (const auto& [flag, path] : inputs) {
    if (!path->empty() && !fs::exists(*path)) {
      throw Error(ErrorCode::InvalidConfig, std::string(flag) + ": " + path->string() + " does not exist");
    }
  }
}

void ensure_out(const RunConfig& config) {
  if (config.out.empty()) throw Error(ErrorCode::InvalidConfig, "--out is required");
  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + config.out.string() + ": " + ec.message());
}

double mean_class_frechet(const io::EmbeddingSet& a, const io::EmbeddingSet& b) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& [label, rows] : a.class_index()) {
    const auto it = b.class_index().find(label);
    if (it == b.class_index().end() || rows.size() < 2 || it->second.size() < 2) continue;
    total += eval::frechet_distance(a.rows(rows), b.rows(it->second));
    ++count;
  }
  return count == 0 ? std::nan("") : total / static_cast<double>(count);
}

}  // namespace

std::string version_string() { return std::string("coda ") + CODA_VERSION + " (" + CODA_GIT_DESCRIBE + ")"; }

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (ipc < 1) fail("ipc must be at least 1");
  if (min_cluster_size < 2) fail("min_cluster_size must be at least 2");
  if (min_samples < 1) fail("min_samples must be at least 1");
  if (dim < 1) fail("dim must be at least 1");
  if (!std::isfinite(gamma) || gamma < 0.0) fail("gamma must be finite and non-negative");
  if (!std::isfinite(cfg_scale)) fail("cfg scale must be finite");
  if (steps < 2) fail("steps must be at least 2");
  if (schedule == diffusion::ScheduleKind::LinearBeta && steps > 1000) fail("linear schedule supports at most 1000 steps");
  if (pis > steps) fail("pis (" + std::to_string(pis) + ") exceeds steps (" + std::to_string(steps) + ")");
  if (knn_k < 1) fail("knn k must be at least 1");
  try {
    bench.validate();
  } catch (const Error& e) {
    fail(std::string("benchmark: ") + e.what());
  }
}

Json RunConfig::to_json() const {
  return Json{{"embeddings", embeddings.generic_string()},
              {"format", format == io::Format::Csv ? "csv" : "binary"},
              {"labels", labels.generic_string()},
              {"model", model.generic_string()},
              {"representatives", representatives.generic_string()},
              {"train", train.generic_string()},
              {"test", test.generic_string()},
              {"ipc", ipc},
              {"min_cluster_size", min_cluster_size},
              {"min_samples", min_samples},
              {"preprocess", preprocess::to_string(preprocess)},
              {"dim", dim},
              {"gamma", gamma},
              {"pis", pis},
              {"steps", steps},
              {"cfg_scale", cfg_scale},
              {"schedule", diffusion::to_string(schedule)},
              {"proxy", eval::to_string(proxy)},
              {"knn_k", knn_k},
              {"seed", seed},
              {"bench",
               {{"classes", bench.classes},
                {"modes", bench.modes},
                {"points", bench.points},
                {"test_points", bench.test_points},
                {"dim", bench.dim},
                {"sigma", bench.sigma},
                {"separation", bench.separation},
                {"class_radius", bench.class_radius},
                {"mode_spread", bench.mode_spread},
                {"noise_fraction", bench.noise_fraction},
                {"prior_shift", bench.prior_shift}}}};
}

ClassDiscovery discover_class(const io::EmbeddingSet& set, int label, const RunConfig& config) {
  const io::ClassView view = io::group_by_class(set, label);
  ClassDiscovery out;
  const Matrix reduced = reduce_class(set.rows(view.rows), config, out.reduced_dim);
  out.clusters = cluster::hdbscan(reduced, {config.min_cluster_size, config.min_samples});
  const auto match = ipc::match_ipc(reduced, out.clusters, config.ipc, config.min_cluster_size, config.min_samples,
                                    derive_seed(config.seed, "outliers", static_cast<std::uint64_t>(label)));
  out.representatives = ipc::bind(set, view, match);
  return out;
}

std::vector<ClassDiscovery> discover(const io::EmbeddingSet& set, const RunConfig& config) {
  config.validate();
  std::vector<ClassDiscovery> out;
  for (int label : set.classes()) out.push_back(discover_class(set, label, config));
  return out;
}

io::EmbeddingSet representative_embeddings(const std::vector<ipc::RepresentativeSet>& sets) {
  std::size_t rows = 0;
  std::size_t dim = 0;
  for (const auto& s : sets) {
    rows += s.entries.size();
    if (!s.entries.empty()) dim = static_cast<std::size_t>(s.entries.front().latent.size());
  }
  FloatMatrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  std::vector<std::string> ids;
  std::vector<int> labels;
  Eigen::Index r = 0;
  for (const auto& s : sets) {
    for (const auto& e : s.entries) {
      x.row(r++) = e.latent.transpose();
      ids.push_back(e.sample_id);
      labels.push_back(s.label);
    }
  }
  return io::EmbeddingSet::create(std::move(x), std::move(ids), std::move(labels));
}

std::vector<Index> baseline_rows(const io::EmbeddingSet& set, int label, std::size_t ipc, Baseline kind,
                                 std::uint64_t seed) {
  const io::ClassView view = io::group_by_class(set, label);
  if (view.rows.size() < ipc) throw Error(ErrorCode::TooFewPoints, "class smaller than ipc");
  const auto ulabel = static_cast<std::uint64_t>(label);
  if (kind == Baseline::Random) {
    Rng rng(derive_seed(seed, "baseline-random", ulabel));
    IndexList pool = view.rows;
    for (std::size_t i = 0; i < ipc; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(ipc);
    return pool;
  }
  Rng rng(derive_seed(seed, "baseline-kmeans", ulabel));
  const auto local = kmeans::select_nearest_to_centroids(set.rows(view.rows), ipc, rng);
  std::vector<Index> rows;
  rows.reserve(local.size());
  for (auto i : local) rows.push_back(view.rows[i]);
  return rows;
}

diffusion::GuidanceConfig guidance_config(const RunConfig& config) {
  diffusion::GuidanceConfig g;
  g.gamma = config.gamma;
  g.pis = config.pis;
  g.cfg_scale = config.cfg_scale;
  g.seed = config.seed;
  return g;
}

std::vector<diffusion::GuidedSampleSet> align(const diffusion::ScoreModel& model,
                                              const std::vector<ipc::RepresentativeSet>& sets,
                                              const RunConfig& config) {
  config.validate();
  model.validate();
  const auto schedule = diffusion::make_schedule(config.steps, config.schedule);
  const auto guidance = guidance_config(config);
  diffusion::validate(guidance, schedule);
  std::vector<diffusion::GuidedSampleSet> out;
  for (const auto& s : sets) {
    Matrix prototypes(static_cast<Eigen::Index>(s.entries.size()), static_cast<Eigen::Index>(model.dim));
    for (std::size_t j = 0; j < s.entries.size(); ++j) {
      const auto& latent = s.entries[j].latent;
      if (static_cast<std::size_t>(latent.size()) != model.dim) {
        throw Error(ErrorCode::DimMismatch, "prototype dimension " + std::to_string(latent.size()) +
                                                " differs from model dimension " + std::to_string(model.dim));
      }
      prototypes.row(static_cast<Eigen::Index>(j)) = latent.cast<double>().transpose();
    }
    out.push_back(diffusion::generate_class_set(model, s.label, prototypes, guidance, schedule));
  }
  return out;
}

io::EmbeddingSet aligned_embeddings(const std::vector<diffusion::GuidedSampleSet>& sets) {
  std::size_t rows = 0;
  std::size_t dim = 0;
  for (const auto& s : sets) {
    rows += s.samples.size();
    if (!s.samples.empty()) dim = static_cast<std::size_t>(s.samples.front().latent.size());
  }
  FloatMatrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  std::vector<std::string> ids;
  std::vector<int> labels;
  Eigen::Index r = 0;
  for (const auto& s : sets) {
    for (const auto& sample : s.samples) {
      x.row(r++) = sample.latent.cast<float>().transpose();
      ids.push_back("aligned-" + std::to_string(s.label) + "-" + std::to_string(sample.j));
      labels.push_back(s.label);
    }
  }
  return io::EmbeddingSet::create(std::move(x), std::move(ids), std::move(labels));
}

diffusion::ScoreModel fit_score_model(const io::EmbeddingSet& set) {
  diffusion::ScoreModel model;
  model.dim = set.dim();
  std::map<int, double> counts;
  for (const auto& [label, rows] : set.class_index()) {
    const Matrix x = set.rows(rows);
    const Vector mean = x.colwise().mean().transpose();
    Vector var = (x.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
    // A constant coordinate still needs a proper density.
    var = var.cwiseMax(1e-6);
    diffusion::Mixture m;
    m.components.push_back({1.0, mean, var});
    model.conditional.emplace(label, std::move(m));
    counts[label] = static_cast<double>(rows.size());
  }
  model.unconditional = diffusion::marginal(model.conditional, counts);
  return model;
}

Json score_model_to_json(const diffusion::ScoreModel& model) {
  Json classes = Json::array();
  for (const auto& [label, m] : model.conditional) classes.push_back({{"label", label}, {"components", mixture_json(m)}});
  return Json{{"format", "coda-score-model"},
              {"version", 1},
              {"dim", model.dim},
              {"classes", classes},
              {"unconditional", mixture_json(model.unconditional)}};
}

diffusion::ScoreModel score_model_from_json(const Json& json) {
  try {
    if (json.at("format") != "coda-score-model" || json.at("version") != 1) {
      throw Error(ErrorCode::MalformedHeader, "not a version-1 score model document");
    }
    diffusion::ScoreModel model;
    model.dim = json.at("dim").get<std::size_t>();
    for (const auto& c : json.at("classes")) {
      model.conditional.emplace(c.at("label").get<int>(), mixture_from_json(c.at("components")));
    }
    model.unconditional = mixture_from_json(json.at("unconditional"));
    model.validate();
    return model;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, std::string("score model: ") + e.what());
  }
}

eval::EvalReport evaluate_sets(const io::EmbeddingSet& train, const io::EmbeddingSet& test, const RunConfig& config) {
  const auto classifier = eval::fit_proxy(train.to_matrix(), train.labels(), config.proxy, config.knn_k);
  return eval::evaluate(classifier, test.to_matrix(), test.labels());
}

Json representatives_manifest(const std::vector<ClassDiscovery>& classes, const RunConfig& config,
                              const std::string& latents_file) {
  Json list = Json::array();
  for (const auto& c : classes) {
    Json entries = Json::array();
    for (const auto& e : c.representatives.entries) {
      entries.push_back({{"sample_id", e.sample_id},
                         {"row", e.row},
                         {"provenance", std::string(ipc::to_string(e.provenance))},
                         {"cluster_size", e.cluster_size}});
    }
    list.push_back({{"class", c.representatives.label},
                    {"ipc", c.representatives.ipc},
                    {"reduced_dim", c.reduced_dim},
                    {"entries", entries},
                    {"diagnostics", diagnostics_json(c.representatives.diagnostics)}});
  }
  return Json{{"kind", "representatives"},
              {"version", version_string()},
              {"config", config.to_json()},
              {"latents", latents_file},
              {"provenance", fractions_json(ipc::source_fractions(representative_sets(classes)))},
              {"classes", list}};
}

Json clusters_report(const std::vector<ClassDiscovery>& classes, const RunConfig& config) {
  Json list = Json::array();
  for (const auto& c : classes) {
    std::vector<std::size_t> sizes;
    for (const auto& members : c.clusters.clusters) sizes.push_back(members.size());
    list.push_back({{"class", c.representatives.label},
                    {"points", c.clusters.num_points()},
                    {"min_cluster_size", c.clusters.min_cluster_size},
                    {"min_samples", c.clusters.min_samples},
                    {"clusters", c.clusters.num_clusters()},
                    {"cluster_sizes", sizes},
                    {"stability", c.clusters.stability},
                    {"outliers", c.clusters.outliers().size()}});
  }
  return Json{{"kind", "clusters"},
              {"version", version_string()},
              {"config", config.to_json()},
              {"outlier_label", cluster::kOutlier},
              {"classes", list}};
}

Json aligned_manifest(const std::vector<diffusion::GuidedSampleSet>& sets,
                      const std::vector<ipc::RepresentativeSet>& prototypes, const RunConfig& config,
                      const std::string& latents_file) {
  std::map<int, const ipc::RepresentativeSet*> by_label;
  for (const auto& p : prototypes) by_label[p.label] = &p;
  Json samples = Json::array();
  for (const auto& s : sets) {
    const auto* protos = by_label.count(s.label) ? by_label.at(s.label) : nullptr;
    for (const auto& sample : s.samples) {
      Json steps = Json::array();
      for (const auto& d : sample.steps) {
        steps.push_back({{"t", d.t},
                         {"guidance_norm", d.guidance_norm},
                         {"correction_norm", d.correction_norm},
                         {"latent_norm", d.latent_norm}});
      }
      Json entry{{"class", s.label},
                 {"j", sample.j},
                 {"gamma", s.config.gamma},
                 {"pis", s.config.pis},
                 {"seed", diffusion::trajectory_seed(s.config.seed, s.label, sample.j)},
                 {"checksum", hex64(sample.checksum)},
                 {"diverged", sample.diverged},
                 {"diagnostics", steps}};
      if (protos && sample.j < protos->entries.size()) entry["prototype"] = protos->entries[sample.j].sample_id;
      samples.push_back(std::move(entry));
    }
  }
  return Json{{"kind", "aligned"},
              {"version", version_string()},
              {"config", config.to_json()},
              {"latents", latents_file},
              {"provenance", fractions_json(ipc::source_fractions(prototypes))},
              {"samples", samples}};
}

Json eval_report_json(const eval::EvalReport& report, const Json& provenance, const RunConfig& config,
                      std::optional<double> frechet) {
  Json per_class = Json::object();
  for (const auto& [label, acc] : report.per_class) per_class[std::to_string(label)] = acc;
  Json j{{"kind", "eval"},
         {"version", version_string()},
         {"config", config.to_json()},
         {"proxy", eval::to_string(config.proxy)},
         {"accuracy", report.accuracy},
         {"per_class", per_class},
         {"test_size", report.test_size},
         {"provenance", provenance}};
  if (frechet && std::isfinite(*frechet)) j["frechet"] = *frechet;
  return j;
}

void write_json(const fs::path& path, const Json& json) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os << json.dump(2) << '\n';
  if (!os) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Json read_json(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": " + e.what());
  }
}

io::EmbeddingSet load_manifest_latents(const fs::path& manifest_path) {
  const Json manifest = read_json(manifest_path);
  if (!manifest.contains("latents") || !manifest["latents"].is_string()) {
    throw Error(ErrorCode::MalformedHeader, manifest_path.string() + " names no latent file");
  }
  return io::load_embeddings(manifest_path.parent_path() / manifest["latents"].get<std::string>(), io::Format::Binary);
}

std::vector<ipc::RepresentativeSet> load_representatives(const fs::path& manifest_path) {
  const Json manifest = read_json(manifest_path);
  if (manifest.value("kind", "") != "representatives") {
    throw Error(ErrorCode::MalformedHeader, manifest_path.string() + " is not a representatives manifest");
  }
  const auto latents = load_manifest_latents(manifest_path);
  std::vector<ipc::RepresentativeSet> out;
  Eigen::Index row = 0;
  try {
    for (const auto& c : manifest.at("classes")) {
      ipc::RepresentativeSet s;
      s.label = c.at("class").get<int>();
      s.ipc = c.at("ipc").get<std::size_t>();
      for (const auto& e : c.at("entries")) {
        if (row >= static_cast<Eigen::Index>(latents.size()) ||
            latents.sample_ids()[static_cast<std::size_t>(row)] != e.at("sample_id").get<std::string>()) {
          throw Error(ErrorCode::MalformedHeader, "manifest entries and latent rows disagree");
        }
        ipc::RepresentativeEntry entry;
        entry.sample_id = e.at("sample_id").get<std::string>();
        entry.row = e.at("row").get<Index>();
        entry.latent = latents.vectors().row(row++).transpose();
        entry.provenance = ipc::parse_provenance(e.at("provenance").get<std::string>());
        entry.cluster_size = e.at("cluster_size").get<std::size_t>();
        s.entries.push_back(std::move(entry));
      }
      out.push_back(std::move(s));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, manifest_path.string() + ": " + e.what());
  }
  return out;
}

std::vector<ClassDiscovery> run_discover(const RunConfig& config) {
  config.validate();
  require_inputs({{"--embeddings", &config.embeddings}, {"--labels", &config.labels}});
  const auto set = load_input(config);
  ensure_out(config);
  auto classes = discover(set, config);
  io::save_embeddings(representative_embeddings(representative_sets(classes)), config.out / kRepresentativesLatents);
  write_json(config.out / kRepresentativesManifest, representatives_manifest(classes, config, kRepresentativesLatents));
  write_json(config.out / kClustersReport, clusters_report(classes, config));
  return classes;
}

std::vector<diffusion::GuidedSampleSet> run_align(const RunConfig& config) {
  config.validate();
  ensure_out(config);
  const fs::path manifest =
      config.representatives.empty() ? config.out / kRepresentativesManifest : config.representatives;
  require_inputs({{"--representatives", &manifest},
                  {"--model", &config.model},
                  {"--embeddings", &config.embeddings},
                  {"--labels", &config.labels}});
  const auto prototypes = load_representatives(manifest);
  const auto model = load_model(config);
  auto sets = align(model, prototypes, config);
  io::save_embeddings(aligned_embeddings(sets), config.out / kAlignedLatents);
  write_json(config.out / kAlignedManifest, aligned_manifest(sets, prototypes, config, kAlignedLatents));
  return sets;
}

eval::EvalReport run_eval(const RunConfig& config) {
  config.validate();
  if (config.train.empty()) throw Error(ErrorCode::InvalidConfig, "--train is required");
  if (config.test.empty()) throw Error(ErrorCode::InvalidConfig, "--test is required");
  require_inputs({{"--train", &config.train}, {"--test", &config.test}});
  ensure_out(config);
  const auto train = load_manifest_latents(config.train);
  const auto test = io::load_embeddings(config.test, config.format);
  const Json manifest = read_json(config.train);
  const auto report = evaluate_sets(train, test, config);
  write_json(config.out / kEvalReport, eval_report_json(report, manifest.value("provenance", Json::object()), config,
                                                        mean_class_frechet(train, test)));
  return report;
}

eval::EvalReport run_pipeline(const RunConfig& config) {
  config.validate();
  if (config.test.empty()) throw Error(ErrorCode::InvalidConfig, "--test is required");
  require_inputs({{"--embeddings", &config.embeddings},
                  {"--labels", &config.labels},
                  {"--model", &config.model},
                  {"--test", &config.test}});
  const auto classes = run_discover(config);
  const auto prototypes = representative_sets(classes);
  const auto model = load_model(config);
  const auto sets = align(model, prototypes, config);
  const auto aligned = aligned_embeddings(sets);
  io::save_embeddings(aligned, config.out / kAlignedLatents);
  write_json(config.out / kAlignedManifest, aligned_manifest(sets, prototypes, config, kAlignedLatents));
  const auto test = io::load_embeddings(config.test, config.format);
  const auto report = evaluate_sets(aligned, test, config);
  write_json(config.out / kEvalReport,
             eval_report_json(report, fractions_json(ipc::source_fractions(prototypes)), config,
                              mean_class_frechet(aligned, test)));
  return report;
}

void run_bench(const RunConfig& config) {
  config.validate();
  ensure_out(config);
  auto spec = config.bench;
  spec.seed = config.seed;
  const auto b = bench::make_benchmark(spec);
  io::save_embeddings(b.train, config.out / "train.bin");
  io::save_embeddings(b.test, config.out / "test.bin");
  write_json(config.out / "model.json", score_model_to_json(b.model));
  Json centers = Json::array();
  for (const auto& c : b.centers) {
    Json modes = Json::array();
    for (Eigen::Index m = 0; m < c.rows(); ++m) {
      modes.push_back(std::vector<double>(c.row(m).data(), c.row(m).data() + c.cols()));
    }
    centers.push_back(modes);
  }
  std::vector<Index> planted;
  for (std::size_t i = 0; i < b.planted.size(); ++i) {
    if (b.planted[i]) planted.push_back(i);
  }
  write_json(config.out / "truth.json", Json{{"kind", "benchmark-truth"},
                                             {"version", version_string()},
                                             {"config", config.to_json()},
                                             {"train_mode", b.train_mode},
                                             {"planted_rows", planted},
                                             {"centers", centers}});
}

std::string grid_report(const fs::path& grid) {
  if (!fs::is_directory(grid)) throw Error(ErrorCode::InvalidConfig, grid.string() + " is not a directory");
  struct Row {
    std::size_t mcs;
    std::string name;
    double accuracy;
    Json provenance;
  };
  std::vector<Row> rows;
  for (const auto& entry : fs::directory_iterator(grid)) {
    if (!entry.is_directory()) continue;
    const auto reps = entry.path() / kRepresentativesManifest;
    const auto ev = entry.path() / kEvalReport;
    if (!fs::exists(reps) || !fs::exists(ev)) continue;
    const Json r = read_json(reps);
    const Json e = read_json(ev);
    try {
      rows.push_back({r.at("config").at("min_cluster_size").get<std::size_t>(), entry.path().filename().string(),
                      e.at("accuracy").get<double>(), r.at("provenance")});
    } catch (const Json::exception& ex) {
      throw Error(ErrorCode::MalformedHeader, entry.path().string() + ": " + ex.what());
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return std::tie(a.mcs, a.name) < std::tie(b.mcs, b.name); });
  std::string csv = "min_cluster_size,accuracy";
  for (std::size_t p = 0; p < ipc::kProvenanceCount; ++p) {
    csv += ",";
    csv += ipc::to_string(static_cast<ipc::Provenance>(p));
  }
  csv += "\n";
  for (const auto& row : rows) {
    csv += std::to_string(row.mcs) + "," + format_double(row.accuracy);
    for (std::size_t p = 0; p < ipc::kProvenanceCount; ++p) {
      csv += "," + format_double(row.provenance.value(std::string(ipc::to_string(static_cast<ipc::Provenance>(p))), 0.0));
    }
    csv += "\n";
  }
  return csv;
}

}  // namespace coda::pipeline
