#pragma once

// Random inputs shared by the unit tests and the acceptance runner.

#include "coda/diffusion.hpp"
#include "coda/rng.hpp"

#include <cmath>

namespace fixture {

inline coda::Vector normal_vector(coda::Rng& rng, std::size_t d, double scale = 1.0) {
  coda::Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = scale * rng.normal();
  return v;
}

inline coda::diffusion::Mixture random_mixture(coda::Rng& rng, std::size_t d, std::size_t k, double spread = 3.0) {
  coda::diffusion::Mixture m;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    coda::diffusion::GaussianComponent c;
    c.weight = rng.uniform(0.2, 1.0);
    total += c.weight;
    c.mean = normal_vector(rng, d, spread);
    c.variance = coda::Vector(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < c.variance.size(); ++j) c.variance(j) = rng.uniform(0.1, 2.0);
    m.components.push_back(std::move(c));
  }
  for (auto& c : m.components) c.weight /= total;
  return m;
}

/// One draw from the mixture.
inline coda::Vector sample(coda::Rng& rng, const coda::diffusion::Mixture& m) {
  double u = rng.uniform();
  std::size_t k = 0;
  while (k + 1 < m.components.size() && u >= m.components[k].weight) u -= m.components[k++].weight;
  const auto& c = m.components[k];
  coda::Vector v(c.mean.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = c.mean(i) + std::sqrt(c.variance(i)) * rng.normal();
  return v;
}

/// Two classes with their own mixtures; the unconditional model is their
/// marginal.
inline coda::diffusion::ScoreModel random_model(coda::Rng& rng, std::size_t d) {
  coda::diffusion::ScoreModel model;
  model.dim = d;
  model.conditional[1] = random_mixture(rng, d, 3);
  model.conditional[2] = random_mixture(rng, d, 2);
  model.unconditional = coda::diffusion::marginal(model.conditional);
  return model;
}

}  // namespace fixture
