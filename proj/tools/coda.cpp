// Command-line front end: discover, align, eval, run, bench, report.
// Exit codes: 0 success, 2 validation error, 3 runtime error.

#include "coda/error.hpp"
#include "coda/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using coda::pipeline::RunConfig;

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Choices {
  std::string format = "binary";
  std::string preprocess = "pca";
  std::string schedule = "linear";
  std::string proxy = "nearest-centroid";
};

void add_options(CLI::App& app, RunConfig& c, Choices& choices) {
  app.add_option("--embeddings", c.embeddings, "Embedding file (discover, run; align fits a model from it)");
  app.add_option("--format", choices.format, "Embedding format: binary or csv");
  app.add_option("--labels", c.labels, "Label sidecar (default <embeddings>.labels.json)");
  app.add_option("--model", c.model, "Score-model JSON for align");
  app.add_option("--representatives", c.representatives, "Representatives manifest for align");
  app.add_option("--train", c.train, "Manifest whose latents train the proxy (eval)");
  app.add_option("--test", c.test, "Held-out embeddings (eval, run)");
  app.add_option("--grid", c.grid, "Directory of run outputs (report)");
  app.add_option("--out", c.out, "Output directory (report: CSV file, default stdout)");

  app.add_option("--ipc", c.ipc, "Representatives per class");
  app.add_option("--min-cluster-size", c.min_cluster_size, "HDBSCAN min_cluster_size");
  app.add_option("--min-samples", c.min_samples, "HDBSCAN min_samples");
  app.add_option("--preprocess", choices.preprocess, "pca or none");
  app.add_option("--dim", c.dim, "PCA output dimension");

  app.add_option("--gamma", c.gamma, "Alignment strength");
  app.add_option("--pis", c.pis, "Final steps without alignment");
  app.add_option("--steps", c.steps, "Sampling steps");
  app.add_option("--cfg", c.cfg_scale, "Classifier-free guidance scale");
  app.add_option("--schedule", choices.schedule, "linear or cosine");

  app.add_option("--proxy", choices.proxy, "nearest-centroid or knn");
  app.add_option("--knn-k", c.knn_k, "Neighbours for the knn proxy");
  app.add_option("--seed", c.seed, "Root seed");

  app.add_option("--classes", c.bench.classes, "Benchmark classes");
  app.add_option("--modes", c.bench.modes, "Benchmark modes per class");
  app.add_option("--points", c.bench.points, "Benchmark training points per class");
  app.add_option("--test-points", c.bench.test_points, "Benchmark test points per class");
  app.add_option("--bench-dim", c.bench.dim, "Benchmark dimension");
  app.add_option("--sigma", c.bench.sigma, "Benchmark mode standard deviation");
  app.add_option("--separation", c.bench.separation, "Minimum mode-center gap in sigmas");
  app.add_option("--class-radius", c.bench.class_radius, "Distance of class anchors from the origin");
  app.add_option("--mode-spread", c.bench.mode_spread, "Radius of mode placement around an anchor");
  app.add_option("--noise-fraction", c.bench.noise_fraction, "Planted cross-class fraction per class");
  app.add_option("--prior-shift", c.bench.prior_shift, "Offset of the model prior in sigmas");
}

void apply_choices(RunConfig& c, const Choices& choices) {
  c.format = coda::io::parse_format(choices.format);
  c.preprocess = coda::preprocess::parse_kind(choices.preprocess);
  c.schedule = coda::diffusion::parse_schedule(choices.schedule);
  c.proxy = coda::eval::parse_proxy(choices.proxy);
}

void print_report(const coda::eval::EvalReport& report) {
  std::cout << "accuracy " << report.accuracy << " on " << report.test_size << " test points\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Representative discovery and guided alignment over embeddings"};
  app.set_version_flag("--version", coda::pipeline::version_string());
  app.set_config("--config", "", "Config file (TOML/INI keys named after the long flags); flags win");
  app.require_subcommand(1);

  RunConfig config;
  Choices choices;
  add_options(app, config, choices);

  auto* discover = app.add_subcommand("discover", "Cluster each class and select exactly ipc representatives");
  auto* align = app.add_subcommand("align", "Generate one guided latent per representative");
  auto* evaluate = app.add_subcommand("eval", "Score a manifest's latents with the proxy classifier");
  auto* run = app.add_subcommand("run", "discover, align and eval in one pass");
  auto* bench = app.add_subcommand("bench", "Write a synthetic benchmark (train, test, model, truth)");
  auto* report = app.add_subcommand("report", "Summarize a grid of runs as CSV");
  for (auto* sub : {discover, align, evaluate, run, bench, report}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    apply_choices(config, choices);
    if (discover->parsed()) {
      for (const auto& c : coda::pipeline::run_discover(config)) {
        const auto& d = c.representatives.diagnostics;
        std::cout << "class " << c.representatives.label << ": " << c.representatives.entries.size()
                  << " representatives from " << d.initial_clusters << " clusters, " << d.outliers << " outliers\n";
      }
    } else if (align->parsed()) {
      for (const auto& s : coda::pipeline::run_align(config)) {
        std::cout << "class " << s.label << ": " << s.samples.size() << " latents"
                  << (s.diverged() ? " (divergent trajectories flagged)" : "") << "\n";
      }
    } else if (evaluate->parsed()) {
      print_report(coda::pipeline::run_eval(config));
    } else if (run->parsed()) {
      print_report(coda::pipeline::run_pipeline(config));
    } else if (bench->parsed()) {
      coda::pipeline::run_bench(config);
      std::cout << "benchmark written to " << config.out.string() << "\n";
    } else if (report->parsed()) {
      if (config.grid.empty()) throw coda::Error(coda::ErrorCode::InvalidConfig, "--grid is required");
      const std::string csv = coda::pipeline::grid_report(config.grid);
      if (config.out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream os(config.out, std::ios::binary | std::ios::trunc);
        if (!(os << csv)) throw coda::Error(coda::ErrorCode::Io, "cannot write " + config.out.string());
      }
    }
  } catch (const coda::Error& e) {
    std::cerr << "coda: " << e.what() << "\n";
    return coda::is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "coda: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
