#include "coda/benchmark.hpp"

#include "coda/error.hpp"
#include "coda/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coda::bench {
namespace {

Vector random_unit(Rng& rng, std::size_t dim) {
  Vector v(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

Vector sample_mode(Rng& rng, const Eigen::Ref<const Vector>& center, double sigma) {
  Vector x(center.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = center(i) + sigma * rng.normal();
  return x;
}

}  // namespace

void BenchmarkSpec::validate() const {
  if (classes < 1) throw Error(ErrorCode::BadSpec, "need at least one class");
  if (modes < 1) throw Error(ErrorCode::BadSpec, "need at least one mode per class");
  if (dim < 1) throw Error(ErrorCode::BadSpec, "dimension must be positive");
  if (points < modes) throw Error(ErrorCode::BadSpec, "fewer points than modes");
  if (!(sigma > 0.0)) throw Error(ErrorCode::BadSpec, "sigma must be positive");
  if (separation < 0.0 || class_radius < 0.0 || mode_spread < 0.0) {
    throw Error(ErrorCode::BadSpec, "geometry parameters must be non-negative");
  }
  if (noise_fraction < 0.0 || noise_fraction >= 1.0) throw Error(ErrorCode::BadSpec, "noise_fraction must lie in [0, 1)");
  if (noise_fraction > 0.0 && classes < 2) throw Error(ErrorCode::BadSpec, "planted noise needs a second class");
  if (!std::isfinite(prior_shift)) throw Error(ErrorCode::BadSpec, "prior_shift must be finite");
}

Benchmark make_benchmark(const BenchmarkSpec& spec) {
  spec.validate();
  Benchmark b;
  b.spec = spec;
  const std::size_t dim = spec.dim;
  const auto d = static_cast<Eigen::Index>(dim);

  Rng geometry(derive_seed(spec.seed, "bench/geometry"));
  std::vector<Vector> all_centers;
  const double min_gap = spec.separation * spec.sigma;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const Vector anchor = spec.class_radius * random_unit(geometry, dim);
    Matrix centers(static_cast<Eigen::Index>(spec.modes), d);
    for (std::size_t m = 0; m < spec.modes; ++m) {
      Vector candidate;
      double spread = spec.mode_spread;
      for (std::size_t attempt = 0;; ++attempt) {
        // Widen the placement region if the separation cannot be met; a
        // zero spread restarts from the required gap.
        if (attempt > 0 && attempt % 1000 == 0) spread = std::max(spread * 1.25, min_gap);
        candidate = anchor + spread * std::pow(geometry.uniform(), 1.0 / static_cast<double>(dim)) *
                                 random_unit(geometry, dim);
        const bool clear = std::all_of(all_centers.begin(), all_centers.end(),
                                       [&](const Vector& o) { return (o - candidate).norm() >= min_gap; });
        if (clear) break;
      }
      all_centers.push_back(candidate);
      centers.row(static_cast<Eigen::Index>(m)) = candidate.transpose();
    }
    b.centers.push_back(std::move(centers));
  }

  const std::size_t planted_per_class =
      static_cast<std::size_t>(std::floor(spec.noise_fraction * static_cast<double>(spec.points)));

  auto draw_class = [&](Rng& rng, std::size_t c, std::size_t count, bool with_planted, FloatMatrix& out,
                        Eigen::Index& row, std::vector<int>* modes, std::vector<bool>* planted) {
    std::vector<bool> is_planted(count, false);
    if (with_planted) {
      // Choose which positions within the class carry planted points.
      std::vector<std::size_t> slots(count);
      std::iota(slots.begin(), slots.end(), std::size_t{0});
      for (std::size_t i = 0; i < planted_per_class; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(count - i));
        std::swap(slots[i], slots[j]);
        is_planted[slots[i]] = true;
      }
    }
    std::size_t emitted_clean = 0;
    for (std::size_t i = 0; i < count; ++i, ++row) {
      Vector x;
      int mode = -1;
      if (is_planted[i]) {
        std::size_t other = static_cast<std::size_t>(rng.below(spec.classes - 1));
        if (other >= c) ++other;
        const auto m = static_cast<Eigen::Index>(rng.below(spec.modes));
        x = sample_mode(rng, b.centers[other].row(m).transpose(), spec.sigma);
      } else {
        // Balanced modes: clean point k goes to mode k mod modes.
        mode = static_cast<int>(emitted_clean % spec.modes);
        ++emitted_clean;
        x = sample_mode(rng, b.centers[c].row(mode).transpose(), spec.sigma);
      }
      out.row(row) = x.cast<float>().transpose();
      if (modes) modes->push_back(mode);
      if (planted) planted->push_back(is_planted[i]);
    }
  };

  auto build = [&](const char* stage, std::size_t per_class, bool with_planted, std::vector<int>* modes,
                   std::vector<bool>* planted) {
    FloatMatrix x(static_cast<Eigen::Index>(spec.classes * per_class), d);
    std::vector<std::string> ids;
    std::vector<int> labels;
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < spec.classes; ++c) {
      Rng rng(derive_seed(spec.seed, stage, c));
      draw_class(rng, c, per_class, with_planted, x, row, modes, planted);
      for (std::size_t i = 0; i < per_class; ++i) {
        ids.push_back(std::string(stage == std::string("bench/train") ? "train" : "test") + "-" +
                      std::to_string(c + 1) + "-" + std::to_string(i));
        labels.push_back(static_cast<int>(c + 1));
      }
    }
    return io::EmbeddingSet::create(std::move(x), std::move(ids), std::move(labels));
  };

  b.train = build("bench/train", spec.points, true, &b.train_mode, &b.planted);
  b.test = build("bench/test", spec.test_points, false, nullptr, nullptr);

  // Score model: the true class mixtures, and their marginal as the
  // unconditional prior, optionally shifted along a fixed random direction.
  b.model.dim = dim;
  const double clean_weight = 1.0 / static_cast<double>(spec.modes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    diffusion::Mixture m;
    for (std::size_t k = 0; k < spec.modes; ++k) {
      m.components.push_back({clean_weight, b.centers[c].row(static_cast<Eigen::Index>(k)).transpose(),
                              Vector::Constant(d, spec.sigma * spec.sigma)});
    }
    b.model.conditional.emplace(static_cast<int>(c + 1), std::move(m));
  }
  b.model.unconditional = diffusion::marginal(b.model.conditional);
  if (spec.prior_shift != 0.0) {
    Rng shift_rng(derive_seed(spec.seed, "bench/prior-shift"));
    const Vector offset = spec.prior_shift * spec.sigma * random_unit(shift_rng, dim);
    for (auto& comp : b.model.unconditional.components) comp.mean += offset;
  }
  return b;
}

}  // namespace coda::bench
