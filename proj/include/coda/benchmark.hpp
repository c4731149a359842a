#pragma once

#include "coda/diffusion.hpp"
#include "coda/embedding_io.hpp"
#include "coda/types.hpp"

#include <cstdint>
#include <vector>

namespace coda::bench {

/// Seeded Gaussian-mixture classes with known mode membership.
///
/// Every class owns `modes` isotropic Gaussian modes (std `sigma`). Class
/// anchors sit on random directions at `class_radius`; mode centers are
/// scattered around their anchor within `mode_spread` and every pair of
/// centers (across all classes) is at least `separation * sigma` apart.
/// `noise_fraction` plants floor(fraction * points) mislabeled points per
/// class, each drawn from a mode of another class.
///
/// The default geometry lets neighboring classes touch, so a selection that
/// misses a mode costs held-out accuracy while the task stays near-separable.
struct BenchmarkSpec {
  std::size_t classes = 10;
  std::size_t modes = 5;
  std::size_t points = 2000;      // training points per class, planted included
  std::size_t test_points = 50;   // held-out points per class
  std::size_t dim = 16;
  double sigma = 1.0;
  double separation = 6.0;
  double class_radius = 22.0;
  double mode_spread = 18.0;
  double noise_fraction = 0.0;
  /// Offset (in units of sigma) of the score model's unconditional prior
  /// from the true marginal. Zero gives a matched model.
  double prior_shift = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Benchmark {
  BenchmarkSpec spec;
  io::EmbeddingSet train;
  io::EmbeddingSet test;
  std::vector<int> train_mode;     // mode index within its class; -1 for planted rows
  std::vector<bool> planted;       // per training row
  std::vector<Matrix> centers;     // per class (ascending label), modes x dim
  diffusion::ScoreModel model;
};

/// Class labels are 1..classes. Planted rows are placed at random positions
/// within their class's rows.
Benchmark make_benchmark(const BenchmarkSpec& spec);

}  // namespace coda::bench
