#pragma once

#include "coda/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace coda::diffusion {

enum class ScheduleKind { LinearBeta, Cosine };

ScheduleKind parse_schedule(const std::string& name);
std::string to_string(ScheduleKind kind);

/// Cumulative signal levels for a T-step reverse process:
/// alpha_bar[0] == 1 and alpha_bar strictly decreasing to alpha_bar[T] < 1e-3.
struct DiffusionSchedule {
  std::vector<double> alpha_bar;

  std::size_t steps() const noexcept { return alpha_bar.size() - 1; }
  double at(std::size_t t) const { return alpha_bar.at(t); }
};

/// LinearBeta subsamples the 1000-step DDPM schedule (beta from 1e-4 to
/// 0.02) at T evenly spaced timesteps. Cosine uses the squared-cosine
/// schedule with offset 0.008 over T steps, betas clipped at 0.999.
DiffusionSchedule make_schedule(std::size_t steps, ScheduleKind kind);

struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  Vector variance;  // diagonal
};

struct Mixture {
  std::vector<GaussianComponent> components;

  std::size_t dim() const { return components.empty() ? 0 : static_cast<std::size_t>(components.front().mean.size()); }
};

/// Validates weights (positive, summing to 1 within 1e-9), variances (> 0)
/// and dimensions.
void validate(const Mixture& mixture, std::size_t dim);

/// Closed-form stand-in for the noise predictor: per-class mixtures plus an
/// unconditional (empty-prompt) mixture.
struct ScoreModel {
  std::size_t dim = 0;
  std::map<int, Mixture> conditional;
  Mixture unconditional;

  const Mixture& mixture(std::optional<int> label) const;
  void validate() const;
};

/// Marginal of all classes: every class component, weighted by class_weight
/// (normalized over classes).
Mixture marginal(const std::map<int, Mixture>& conditional, const std::map<int, double>& class_weight = {});

/// log p_t(z) for the mixture diffused to signal level alpha_bar:
/// components N(sqrt(a) mu, a Sigma + (1 - a) I).
double log_density(const Mixture& mixture, const Vector& z, double alpha_bar);

/// grad_z log p_t(z), log-sum-exp stabilized.
Vector score(const Mixture& mixture, const Vector& z, double alpha_bar);

/// eps = -sqrt(1 - alpha_bar_t) * grad log p_t(z_t). `label` empty means
/// unconditional.
Vector analytic_eps(const ScoreModel& model, const Vector& z_t, std::size_t t, std::optional<int> label,
                    const DiffusionSchedule& schedule);

/// (z_t - sqrt(1 - a) eps) / sqrt(a)
Vector predict_z0(const Vector& z_t, const Vector& eps, double alpha_bar);

/// s_j - z0_hat
Vector guidance_vector(const Vector& prototype, const Vector& z0_hat);

/// gamma * g * (-sqrt(a) / sqrt(1 - a)); moves the z0 prediction by gamma * g.
Vector noise_correction(const Vector& g, double alpha_bar, double gamma);

/// eps_u + scale * (eps_c - eps_u)
Vector cfg_combine(const Vector& eps_uncond, const Vector& eps_cond, double cfg_scale);

/// Deterministic DDIM (eta = 0) move from signal level a_t to a_prev.
Vector ddim_update(const Vector& z_t, const Vector& eps, double alpha_bar_t, double alpha_bar_prev);

struct GuidanceConfig {
  double gamma = 0.1;
  std::size_t pis = 5;  // final steps that revert to plain CFG
  double cfg_scale = 5.0;
  std::uint64_t seed = 0;
};

void validate(const GuidanceConfig& config, const DiffusionSchedule& schedule);

/// The correction is active on the first T - pis denoising steps, i.e. for
/// t > pis.
inline bool guidance_active(std::size_t t, std::size_t pis) noexcept { return t > pis; }

struct StepDiagnostics {
  std::size_t t = 0;
  double guidance_norm = 0.0;    // |g|, 0 on unguided steps
  double correction_norm = 0.0;  // |delta eps|
  double latent_norm = 0.0;      // |z_{t-1}|
};

/// One reverse step. The unconditional estimate is never modified; the
/// conditional one gets delta eps while guidance is active, then CFG mixes
/// them and DDIM moves to t - 1. A null prototype means plain CFG.
Vector guided_step(const Vector& z_t, std::size_t t, const ScoreModel& model, int label, const Vector* prototype,
                   const GuidanceConfig& config, const DiffusionSchedule& schedule,
                   StepDiagnostics* diagnostics = nullptr);

/// Reference CFG + DDIM step with no guidance code path at all.
Vector cfg_step(const Vector& z_t, std::size_t t, const ScoreModel& model, int label, double cfg_scale,
                const DiffusionSchedule& schedule);

struct GuidedSample {
  std::size_t j = 0;  // index of the guiding prototype (0-based)
  Vector latent;
  std::uint64_t checksum = 0;  // FNV-1a over every intermediate latent
  std::vector<StepDiagnostics> steps;
  bool diverged = false;
};

struct GuidedSampleSet {
  int label = 0;
  GuidanceConfig config;
  std::vector<GuidedSample> samples;

  bool diverged() const;
  Matrix latents() const;
};

/// Seed of trajectory j of a class: derive_seed(config seed, "align", label, j).
std::uint64_t trajectory_seed(std::uint64_t seed, int label, std::size_t j);

/// Initial noise z_T for trajectory j.
Vector initial_noise(std::size_t dim, std::uint64_t seed, int label, std::size_t j);

/// |z| beyond this multiple of the trajectory's natural scale flags
/// divergence.
inline constexpr double kDivergenceFactor = 1e2;

/// Trajectory j starts from its own noise stream and is guided by row j of
/// `prototypes` at every active step. Divergent trajectories are flagged,
/// and stop integrating once flagged.
GuidedSampleSet generate_class_set(const ScoreModel& model, int label, const Matrix& prototypes,
                                   const GuidanceConfig& config, const DiffusionSchedule& schedule);

/// `count` plain-CFG trajectories drawn from the same noise streams.
GuidedSampleSet generate_baseline_set(const ScoreModel& model, int label, std::size_t count,
                                      const GuidanceConfig& config, const DiffusionSchedule& schedule);

}  // namespace coda::diffusion
