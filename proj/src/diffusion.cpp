#include "coda/diffusion.hpp"

#include "coda/error.hpp"
#include "coda/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

namespace coda::diffusion {
namespace {

constexpr std::size_t kBaseSteps = 1000;
constexpr double kBetaStart = 1e-4;
constexpr double kBetaEnd = 0.02;
constexpr double kCosineOffset = 0.008;
constexpr double kMaxBeta = 0.999;

void require_dim(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimMismatch, std::string(what) + ": " + std::to_string(a.size()) + " vs " +
                                            std::to_string(b.size()));
  }
}

// Per-component log weight + log normal density, and the diffused moments.
struct Diffused {
  std::vector<double> log_terms;
};

Diffused component_terms(const Mixture& mixture, const Vector& z, double alpha_bar) {
  const double root = std::sqrt(alpha_bar);
  Diffused out;
  out.log_terms.reserve(mixture.components.size());
  for (const auto& c : mixture.components) {
    require_dim(z, c.mean, "latent vs mixture mean");
    double log_p = std::log(c.weight);
    for (Eigen::Index d = 0; d < z.size(); ++d) {
      const double v = alpha_bar * c.variance(d) + (1.0 - alpha_bar);
      const double diff = z(d) - root * c.mean(d);
      log_p -= 0.5 * (std::log(2.0 * std::numbers::pi * v) + diff * diff / v);
    }
    out.log_terms.push_back(log_p);
  }
  return out;
}

void hash_vector(std::uint64_t& h, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(v(i));
    for (int b = 0; b < 8; ++b) {
      h ^= bits & 0xffu;
      h *= 0x100000001b3ULL;
      bits >>= 8;
    }
  }
}

double model_scale(const Mixture& mixture) {
  double scale = 1.0;
  for (const auto& c : mixture.components) scale = std::max(scale, c.mean.norm() + std::sqrt(c.variance.sum()));
  return scale;
}

}  // namespace

ScheduleKind parse_schedule(const std::string& name) {
  if (name == "linear" || name == "linear-beta") return ScheduleKind::LinearBeta;
  if (name == "cosine") return ScheduleKind::Cosine;
  throw Error(ErrorCode::InvalidConfig, "unknown schedule '" + name + "'");
}

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::Cosine ? "cosine" : "linear"; }

DiffusionSchedule make_schedule(std::size_t steps, ScheduleKind kind) {
  if (steps < 2) throw Error(ErrorCode::BadT, "need at least 2 steps, got " + std::to_string(steps));
  DiffusionSchedule s;
  s.alpha_bar.assign(steps + 1, 1.0);
  if (kind == ScheduleKind::LinearBeta) {
    if (steps > kBaseSteps) throw Error(ErrorCode::BadT, "linear schedule supports at most 1000 steps");
    std::vector<double> base(kBaseSteps + 1, 1.0);
    for (std::size_t i = 1; i <= kBaseSteps; ++i) {
      const double beta = kBetaStart + (kBetaEnd - kBetaStart) * static_cast<double>(i - 1) / (kBaseSteps - 1);
      base[i] = base[i - 1] * (1.0 - beta);
    }
    for (std::size_t k = 1; k <= steps; ++k) {
      const auto tau = static_cast<std::size_t>(std::llround(static_cast<double>(k * kBaseSteps) / static_cast<double>(steps)));
      s.alpha_bar[k] = base[tau];
    }
  } else {
    auto f = [steps](std::size_t t) {
      const double x = (static_cast<double>(t) / static_cast<double>(steps) + kCosineOffset) / (1.0 + kCosineOffset);
      const double c = std::cos(x * std::numbers::pi / 2.0);
      return c * c;
    };
    for (std::size_t k = 1; k <= steps; ++k) {
      const double beta = std::min(1.0 - f(k) / f(k - 1), kMaxBeta);
      s.alpha_bar[k] = s.alpha_bar[k - 1] * (1.0 - beta);
    }
  }
  return s;
}

void validate(const Mixture& mixture, std::size_t dim) {
  if (mixture.components.empty()) throw Error(ErrorCode::BadSpec, "mixture has no components");
  double total = 0.0;
  for (const auto& c : mixture.components) {
    if (!(c.weight > 0.0)) throw Error(ErrorCode::BadSpec, "mixture weights must be positive");
    if (static_cast<std::size_t>(c.mean.size()) != dim || static_cast<std::size_t>(c.variance.size()) != dim) {
      throw Error(ErrorCode::DimMismatch, "mixture component dimension differs from model dimension");
    }
    if (!c.mean.allFinite() || !(c.variance.array() > 0.0).all() || !c.variance.allFinite()) {
      throw Error(ErrorCode::BadSpec, "component variances must be finite and positive");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::BadSpec, "mixture weights sum to " + std::to_string(total));
}

const Mixture& ScoreModel::mixture(std::optional<int> label) const {
  if (!label) return unconditional;
  const auto it = conditional.find(*label);
  if (it == conditional.end()) throw Error(ErrorCode::UnknownClass, "score model has no class " + std::to_string(*label));
  return it->second;
}

void ScoreModel::validate() const {
  if (dim == 0) throw Error(ErrorCode::BadSpec, "score model dimension is zero");
  diffusion::validate(unconditional, dim);
  for (const auto& [label, m] : conditional) diffusion::validate(m, dim);
}

Mixture marginal(const std::map<int, Mixture>& conditional, const std::map<int, double>& class_weight) {
  double total = 0.0;
  for (const auto& [label, m] : conditional) {
    const auto it = class_weight.find(label);
    total += it == class_weight.end() ? 1.0 : it->second;
  }
  Mixture out;
  for (const auto& [label, m] : conditional) {
    const auto it = class_weight.find(label);
    const double w = (it == class_weight.end() ? 1.0 : it->second) / total;
    for (auto c : m.components) {
      c.weight *= w;
      out.components.push_back(std::move(c));
    }
  }
  return out;
}

double log_density(const Mixture& mixture, const Vector& z, double alpha_bar) {
  const auto terms = component_terms(mixture, z, alpha_bar).log_terms;
  const double peak = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(peak)) throw Error(ErrorCode::NumericalUnderflow, "every component has zero density");
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return peak + std::log(sum);
}

Vector score(const Mixture& mixture, const Vector& z, double alpha_bar) {
  const auto terms = component_terms(mixture, z, alpha_bar).log_terms;
  const double peak = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(peak)) throw Error(ErrorCode::NumericalUnderflow, "every component has zero density");
  std::vector<double> resp(terms.size());
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    resp[i] = std::exp(terms[i] - peak);
    total += resp[i];
  }
  const double root = std::sqrt(alpha_bar);
  Vector grad = Vector::Zero(z.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& c = mixture.components[i];
    const double r = resp[i] / total;
    if (r == 0.0) continue;
    const Eigen::ArrayXd v = alpha_bar * c.variance.array() + (1.0 - alpha_bar);
    grad.array() -= r * (z.array() - root * c.mean.array()) / v;
  }
  return grad;
}

Vector analytic_eps(const ScoreModel& model, const Vector& z_t, std::size_t t, std::optional<int> label,
                    const DiffusionSchedule& schedule) {
  if (t < 1 || t > schedule.steps()) throw Error(ErrorCode::BadT, "timestep " + std::to_string(t) + " out of range");
  const double a = schedule.at(t);
  return -std::sqrt(1.0 - a) * score(model.mixture(label), z_t, a);
}

Vector predict_z0(const Vector& z_t, const Vector& eps, double alpha_bar) {
  require_dim(z_t, eps, "predict_z0");
  return (z_t - std::sqrt(1.0 - alpha_bar) * eps) / std::sqrt(alpha_bar);
}

Vector guidance_vector(const Vector& prototype, const Vector& z0_hat) {
  require_dim(prototype, z0_hat, "guidance_vector");
  return prototype - z0_hat;
}

Vector noise_correction(const Vector& g, double alpha_bar, double gamma) {
  return gamma * g * (-std::sqrt(alpha_bar) / std::sqrt(1.0 - alpha_bar));
}

Vector cfg_combine(const Vector& eps_uncond, const Vector& eps_cond, double cfg_scale) {
  return eps_uncond + cfg_scale * (eps_cond - eps_uncond);
}

Vector ddim_update(const Vector& z_t, const Vector& eps, double alpha_bar_t, double alpha_bar_prev) {
  const Vector z0 = predict_z0(z_t, eps, alpha_bar_t);
  return std::sqrt(alpha_bar_prev) * z0 + std::sqrt(1.0 - alpha_bar_prev) * eps;
}

void validate(const GuidanceConfig& config, const DiffusionSchedule& schedule) {
  if (config.pis > schedule.steps()) {
    throw Error(ErrorCode::InvalidConfig, "pis " + std::to_string(config.pis) + " exceeds " +
                                              std::to_string(schedule.steps()) + " steps");
  }
  if (!std::isfinite(config.gamma) || config.gamma < 0.0) throw Error(ErrorCode::InvalidConfig, "gamma must be finite and >= 0");
  if (!std::isfinite(config.cfg_scale)) throw Error(ErrorCode::InvalidConfig, "cfg scale must be finite");
}

Vector guided_step(const Vector& z_t, std::size_t t, const ScoreModel& model, int label, const Vector* prototype,
                   const GuidanceConfig& config, const DiffusionSchedule& schedule, StepDiagnostics* diagnostics) {
  const double a = schedule.at(t);
  const Vector eps_u = analytic_eps(model, z_t, t, std::nullopt, schedule);
  Vector eps_c = analytic_eps(model, z_t, t, label, schedule);
  double g_norm = 0.0;
  double d_norm = 0.0;
  if (prototype != nullptr && guidance_active(t, config.pis)) {
    const Vector g = guidance_vector(*prototype, predict_z0(z_t, eps_c, a));
    const Vector delta = noise_correction(g, a, config.gamma);
    eps_c += delta;
    g_norm = g.norm();
    d_norm = delta.norm();
  }
  Vector next = ddim_update(z_t, cfg_combine(eps_u, eps_c, config.cfg_scale), a, schedule.at(t - 1));
  if (diagnostics) *diagnostics = StepDiagnostics{t, g_norm, d_norm, next.norm()};
  return next;
}

Vector cfg_step(const Vector& z_t, std::size_t t, const ScoreModel& model, int label, double cfg_scale,
                const DiffusionSchedule& schedule) {
  const Vector eps_u = analytic_eps(model, z_t, t, std::nullopt, schedule);
  const Vector eps_c = analytic_eps(model, z_t, t, label, schedule);
  return ddim_update(z_t, cfg_combine(eps_u, eps_c, cfg_scale), schedule.at(t), schedule.at(t - 1));
}

bool GuidedSampleSet::diverged() const {
  return std::any_of(samples.begin(), samples.end(), [](const GuidedSample& s) { return s.diverged; });
}

Matrix GuidedSampleSet::latents() const {
  if (samples.empty()) return Matrix();
  Matrix out(static_cast<Eigen::Index>(samples.size()), samples.front().latent.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = samples[i].latent.transpose();
  return out;
}

std::uint64_t trajectory_seed(std::uint64_t seed, int label, std::size_t j) {
  return derive_seed(seed, "align", static_cast<std::uint64_t>(label), j);
}

Vector initial_noise(std::size_t dim, std::uint64_t seed, int label, std::size_t j) {
  Rng rng(trajectory_seed(seed, label, j));
  Vector z(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return z;
}

namespace {

GuidedSampleSet run_trajectories(const ScoreModel& model, int label, std::size_t count, const Matrix* prototypes,
                                 const GuidanceConfig& config, const DiffusionSchedule& schedule) {
  validate(config, schedule);
  if (prototypes && static_cast<std::size_t>(prototypes->cols()) != model.dim) {
    throw Error(ErrorCode::DimMismatch, "prototype dimension " + std::to_string(prototypes->cols()) +
                                            " differs from score model dimension " + std::to_string(model.dim));
  }
  const double base_scale = std::max(model_scale(model.mixture(label)), model_scale(model.unconditional));
  GuidedSampleSet out;
  out.label = label;
  out.config = config;
  for (std::size_t j = 0; j < count; ++j) {
    GuidedSample sample;
    sample.j = j;
    Vector z = initial_noise(model.dim, config.seed, label, j);
    Vector prototype;
    if (prototypes) prototype = prototypes->row(static_cast<Eigen::Index>(j)).transpose();
    const double limit =
        kDivergenceFactor * std::max({base_scale, z.norm(), prototypes ? prototype.norm() : 0.0});
    std::uint64_t h = 0xcbf29ce484222325ULL;
    hash_vector(h, z);
    for (std::size_t t = schedule.steps(); t >= 1; --t) {
      StepDiagnostics diag;
      if (prototypes) {
        z = guided_step(z, t, model, label, &prototype, config, schedule, &diag);
      } else {
        z = cfg_step(z, t, model, label, config.cfg_scale, schedule);
        diag = StepDiagnostics{t, 0.0, 0.0, z.norm()};
      }
      sample.steps.push_back(diag);
      hash_vector(h, z);
      if (!z.allFinite() || diag.latent_norm > limit) {
        sample.diverged = true;
        break;
      }
    }
    sample.latent = std::move(z);
    sample.checksum = h;
    out.samples.push_back(std::move(sample));
  }
  return out;
}

}  // namespace

GuidedSampleSet generate_class_set(const ScoreModel& model, int label, const Matrix& prototypes,
                                   const GuidanceConfig& config, const DiffusionSchedule& schedule) {
  return run_trajectories(model, label, static_cast<std::size_t>(prototypes.rows()), &prototypes, config, schedule);
}

GuidedSampleSet generate_baseline_set(const ScoreModel& model, int label, std::size_t count,
                                      const GuidanceConfig& config, const DiffusionSchedule& schedule) {
  return run_trajectories(model, label, count, nullptr, config, schedule);
}

}  // namespace coda::diffusion
