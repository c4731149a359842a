#include "coda/error.hpp"
#include "coda/pipeline.hpp"

#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace coda;
using namespace coda::pipeline;

namespace {

bench::BenchmarkSpec small_spec(std::uint64_t seed) {
  bench::BenchmarkSpec s;
  s.classes = 3;
  s.modes = 3;
  s.points = 300;
  s.test_points = 20;
  s.dim = 6;
  s.seed = seed;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("coda-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("benchmark shape and labels") {
  const auto b = bench::make_benchmark(small_spec(1));
  CHECK(b.train.size() == 900);
  CHECK(b.test.size() == 60);
  CHECK(b.train.dim() == 6);
  CHECK(b.train.classes() == std::vector<int>{1, 2, 3});
  CHECK(b.centers.size() == 3);
  // Clean points are balanced over modes.
  std::map<std::pair<int, int>, int> per_mode;
  for (std::size_t i = 0; i < b.train.size(); ++i) ++per_mode[{b.train.labels()[i], b.train_mode[i]}];
  for (const auto& [key, count] : per_mode) CHECK(count == 100);
}

TEST_CASE("two separated blobs") {
  bench::BenchmarkSpec s;
  s.classes = 2;
  s.modes = 1;
  s.points = 100;
  s.test_points = 10;
  s.dim = 4;
  s.separation = 10.0;
  s.class_radius = 0.0;
  s.mode_spread = 0.0;
  const auto b = bench::make_benchmark(s);
  CHECK((b.centers[0].row(0) - b.centers[1].row(0)).norm() >= 10.0);
  // The perpendicular bisector of the centers separates the classes.
  const Vector c0 = b.centers[0].row(0).transpose();
  const Vector c1 = b.centers[1].row(0).transpose();
  const Vector normal = c1 - c0;
  const double offset = normal.dot(0.5 * (c0 + c1));
  const Matrix x = b.train.to_matrix();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const bool side = x.row(i).dot(normal) > offset;
    CHECK(side == (b.train.labels()[static_cast<std::size_t>(i)] == 2));
  }
}

TEST_CASE("planted noise count") {
  auto s = small_spec(2);
  s.noise_fraction = 0.05;
  const auto b = bench::make_benchmark(s);
  std::map<int, int> planted;
  for (std::size_t i = 0; i < b.train.size(); ++i) {
    if (b.planted[i]) {
      ++planted[b.train.labels()[i]];
      CHECK(b.train_mode[i] == -1);
    }
  }
  for (int label : {1, 2, 3}) CHECK(planted[label] == 15);
}

TEST_CASE("benchmark spec validation") {
  auto s = small_spec(0);
  s.classes = 0;
  CHECK_THROWS_AS(bench::make_benchmark(s), Error);
  s = small_spec(0);
  s.noise_fraction = 1.0;
  CHECK_THROWS_AS(bench::make_benchmark(s), Error);
  s = small_spec(0);
  s.sigma = 0.0;
  try {
    bench::make_benchmark(s);
    FAIL("expected BadSpec");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadSpec);
  }
}

TEST_CASE("modes are recovered at a tuned min_cluster_size") {
  const auto b = bench::make_benchmark(small_spec(3));
  RunConfig config;
  config.min_cluster_size = 30;
  config.ipc = 3;
  for (int label : {1, 2, 3}) {
    const auto d = discover_class(b.train, label, config);
    CHECK(d.clusters.num_clusters() == 3);
    CHECK(d.representatives.entries.size() == 3);
  }
}

TEST_CASE("run config validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.pis = 51;
  try {
    c.validate();
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
    CHECK(is_validation_error(e.code()));
  }
  c = RunConfig{};
  c.ipc = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = RunConfig{};
  c.bench.modes = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("baselines pick distinct rows of the class") {
  const auto b = bench::make_benchmark(small_spec(4));
  for (auto kind : {Baseline::Random, Baseline::KMeans}) {
    const auto rows = baseline_rows(b.train, 2, 7, kind, 5);
    CHECK(rows.size() == 7);
    CHECK(std::set<Index>(rows.begin(), rows.end()).size() == 7);
    for (auto r : rows) CHECK(b.train.labels()[r] == 2);
    CHECK(rows == baseline_rows(b.train, 2, 7, kind, 5));
  }
}

TEST_CASE("score model JSON round trip") {
  const auto b = bench::make_benchmark(small_spec(5));
  const auto fitted = fit_score_model(b.train);
  CHECK(fitted.dim == 6);
  CHECK(fitted.conditional.size() == 3);
  CHECK_NOTHROW(fitted.validate());
  for (const auto* model : {&fitted, &b.model}) {
    const auto back = score_model_from_json(score_model_to_json(*model));
    CHECK(score_model_to_json(back) == score_model_to_json(*model));
    const Vector z = Vector::Constant(6, 0.5);
    CHECK(diffusion::score(back.conditional.at(2), z, 0.3) == diffusion::score(model->conditional.at(2), z, 0.3));
  }
  CHECK_THROWS_AS(score_model_from_json(Json{{"format", "other"}}), Error);
}

TEST_CASE("end to end run writes self-describing, reproducible artifacts") {
  const fs::path dir = scratch("e2e");
  RunConfig config;
  config.out = dir / "bench";
  config.bench = small_spec(0);
  config.seed = 7;
  run_bench(config);
  for (const char* f : {"train.bin", "test.bin", "model.json", "truth.json"}) CHECK(fs::exists(config.out / f));

  RunConfig run;
  run.embeddings = dir / "bench" / "train.bin";
  run.test = dir / "bench" / "test.bin";
  run.model = dir / "bench" / "model.json";
  run.out = dir / "run";
  run.ipc = 4;
  run.min_cluster_size = 20;
  run.steps = 10;
  run.seed = 7;
  const auto report = run_pipeline(run);
  CHECK(report.test_size == 60);

  const std::vector<std::string> files = {kRepresentativesManifest, kRepresentativesLatents, kClustersReport,
                                          kAlignedManifest, kAlignedLatents, kEvalReport};
  std::map<std::string, std::string> first;
  for (const auto& f : files) {
    REQUIRE(fs::exists(run.out / f));
    first[f] = slurp(run.out / f);
  }
  const Json reps = read_json(run.out / kRepresentativesManifest);
  CHECK(reps.at("version").get<std::string>().rfind("coda ", 0) == 0);
  CHECK(reps.at("config").at("ipc") == 4);
  for (const auto& cls : reps.at("classes")) CHECK(cls.at("entries").size() == 4);
  CHECK(read_json(run.out / kEvalReport).contains("frechet"));

  run_pipeline(run);
  for (const auto& f : files) CHECK_MESSAGE(slurp(run.out / f) == first[f], f);

  // A different seed changes the aligned latents.
  run.seed = 8;
  run_pipeline(run);
  CHECK(slurp(run.out / kAlignedLatents) != first[kAlignedLatents]);
  fs::remove_all(dir);
}

TEST_CASE("stages chain through their manifests") {
  const fs::path dir = scratch("stages");
  RunConfig config;
  config.out = dir;
  config.bench = small_spec(1);
  run_bench(config);

  RunConfig d;
  d.embeddings = dir / "train.bin";
  d.out = dir / "disc";
  d.ipc = 3;
  d.min_cluster_size = 30;
  run_discover(d);
  const auto sets = load_representatives(d.out / kRepresentativesManifest);
  REQUIRE(sets.size() == 3);
  for (const auto& s : sets) CHECK(s.entries.size() == 3);

  RunConfig a = d;
  a.steps = 8;
  run_align(a);  // model fitted from the embeddings
  CHECK(load_manifest_latents(a.out / kAlignedManifest).size() == 9);

  RunConfig e;
  e.train = d.out / kRepresentativesManifest;
  e.test = dir / "test.bin";
  e.out = dir / "eval";
  const auto report = run_eval(e);
  CHECK(report.accuracy >= 0.0);
  CHECK(report.accuracy <= 1.0);
  fs::remove_all(dir);
}

TEST_CASE("grid report") {
  const fs::path dir = scratch("grid");
  RunConfig config;
  config.out = dir / "bench";
  config.bench = small_spec(2);
  run_bench(config);
  for (std::size_t mcs : {30, 10}) {
    RunConfig r;
    r.embeddings = dir / "bench" / "train.bin";
    r.test = dir / "bench" / "test.bin";
    r.out = dir / "grid" / ("mcs" + std::to_string(mcs));
    r.min_cluster_size = mcs;
    r.ipc = 3;
    r.steps = 6;
    run_pipeline(r);
  }
  const std::string csv = grid_report(dir / "grid");
  std::istringstream lines(csv);
  std::string header;
  std::string row1;
  std::string row2;
  std::getline(lines, header);
  std::getline(lines, row1);
  std::getline(lines, row2);
  CHECK(header == "min_cluster_size,accuracy,InitCluster,Split,Outlier,ForcedSplit");
  CHECK(row1.rfind("10,", 0) == 0);
  CHECK(row2.rfind("30,", 0) == 0);
  CHECK_THROWS_AS(grid_report(dir / "missing"), Error);
  fs::remove_all(dir);
}
