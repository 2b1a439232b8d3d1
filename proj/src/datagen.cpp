#include "mousse/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mousse/errors.hpp"

namespace mousse {

double gamma_at(const GammaSchedule& schedule, std::size_t t) {
  const double tt = static_cast<double>(t);
  double gamma = 0.0;
  if (const auto* s = std::get_if<StaticGamma>(&schedule)) {
    gamma = s->gamma;
  } else if (const auto* s = std::get_if<SlowGamma>(&schedule)) {
    const double p = static_cast<double>(s->period);
    gamma = t <= s->period ? s->start - s->gamma0 * tt : s->start - s->gamma0 * (2.0 * p - tt);
  } else {
    const auto& j = std::get<JumpGamma>(schedule);
    const double before = j.start - j.gamma0 * static_cast<double>(j.change_time - 1);
    gamma = t < j.change_time ? j.start - j.gamma0 * tt : before - j.jump - j.gamma0 * tt;
  }
  if (!(gamma > 0.0)) throw ConfigError("bump width schedule reached a non-positive value at t = " + std::to_string(t));
  return gamma;
}

double chirp_rate_at(const ChirpSchedule& schedule, std::size_t t) {
  const double tt = static_cast<double>(t);
  const double p = static_cast<double>(schedule.period);
  return t <= schedule.period ? schedule.rate * tt : schedule.rate * (2.0 * p - tt);
}

Eigen::Index ManifoldSpec::ambient_dim() const {
  return std::visit([](const auto& m) { return m.ambient_dim; }, manifold);
}

int ManifoldSpec::intrinsic_dim() const { return std::holds_alternative<BumpManifold>(manifold) ? 1 : 2; }

Eigen::Index ManifoldSpec::observed_count() const {
  return static_cast<Eigen::Index>(std::lround((1.0 - missing_frac) * static_cast<double>(ambient_dim())));
}

std::optional<std::size_t> ManifoldSpec::change_time() const {
  if (const auto* b = std::get_if<BumpManifold>(&manifold))
    if (const auto* j = std::get_if<JumpGamma>(&b->gamma)) return j->change_time;
  return std::nullopt;
}

void ManifoldSpec::validate() const {
  if (ambient_dim() < 2) throw ConfigError("ambient dimension must be >= 2");
  if (!(noise_var >= 0.0)) throw ConfigError("noise variance must be non-negative");
  if (!(missing_frac >= 0.0 && missing_frac < 1.0)) throw ConfigError("missing fraction must lie in [0, 1)");
  if (observed_count() < 1) throw ConfigError("missing fraction leaves no observed entries");
  if (const auto* b = std::get_if<BumpManifold>(&manifold)) {
    if (const auto* s = std::get_if<StaticGamma>(&b->gamma); s && !(s->gamma > 0.0))
      throw ConfigError("bump width must be positive");
    if (const auto* j = std::get_if<JumpGamma>(&b->gamma); j && j->change_time < 1)
      throw ConfigError("change time must be >= 1");
  }
}

Eigen::VectorXd bump_point(double theta, double gamma, Eigen::Index ambient_dim) {
  const double scale = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double dim = static_cast<double>(ambient_dim);
  Eigen::VectorXd v(ambient_dim);
  for (Eigen::Index i = 0; i < ambient_dim; ++i) {
    const double z = -2.0 + 4.0 * static_cast<double>(i + 1) / dim;
    const double u = (z - theta) / gamma;
    v(i) = scale * std::exp(-0.5 * u * u);
  }
  return v;
}

Eigen::VectorXd chirp_point(double f0, double phase, double k, Eigen::Index ambient_dim) {
  Eigen::VectorXd v(ambient_dim);
  for (Eigen::Index i = 0; i < ambient_dim; ++i) {
    const double z = 1e-4 * static_cast<double>(i + 1);
    v(i) = std::sin(2.0 * std::numbers::pi * (f0 * z + 0.5 * k * k * z * z + phase));
  }
  return v;
}

StreamGenerator::StreamGenerator(ManifoldSpec spec)
    : spec_(std::move(spec)), rng_(spec_.seed), noise_(0.0, std::sqrt(spec_.noise_var)) {
  spec_.validate();
  indices_.resize(static_cast<std::size_t>(spec_.ambient_dim()));
  for (std::size_t i = 0; i < indices_.size(); ++i) indices_[i] = static_cast<Eigen::Index>(i);
}

Eigen::VectorXd StreamGenerator::draw_point(std::size_t t, std::vector<double>& theta, double& schedule_value) {
  if (const auto* b = std::get_if<BumpManifold>(&spec_.manifold)) {
    std::uniform_real_distribution<double> position(-2.0, 2.0);
    const double th = position(rng_);
    schedule_value = gamma_at(b->gamma, t);
    theta = {th};
    return bump_point(th, schedule_value, b->ambient_dim);
  }
  const auto& c = std::get<ChirpManifold>(spec_.manifold);
  std::uniform_real_distribution<double> frequency(1.0, 100.0);
  std::uniform_real_distribution<double> phase(0.0, 1.0);
  const double f0 = frequency(rng_);
  const double ph = phase(rng_);
  schedule_value = chirp_rate_at(c.schedule, t);
  theta = {f0, ph};
  return chirp_point(f0, ph, schedule_value, c.ambient_dim);
}

Eigen::VectorXd StreamGenerator::add_noise(const Eigen::VectorXd& v) {
  Eigen::VectorXd x = v;
  if (spec_.noise_var > 0.0)
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += noise_(rng_);
  return x;
}

std::vector<Eigen::Index> StreamGenerator::draw_mask() {
  const std::size_t keep = static_cast<std::size_t>(spec_.observed_count());
  if (keep == indices_.size()) return indices_;
  // Partial Fisher-Yates: the first `keep` slots become a uniform subset.
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, indices_.size() - 1);
    std::swap(indices_[i], indices_[pick(rng_)]);
  }
  std::vector<Eigen::Index> mask(indices_.begin(), indices_.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(mask.begin(), mask.end());
  return mask;
}

std::vector<Eigen::VectorXd> StreamGenerator::training_batch(std::size_t n) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  std::vector<double> theta;
  double schedule_value = 0.0;
  for (std::size_t i = 0; i < n; ++i) out.push_back(add_noise(draw_point(1, theta, schedule_value)));
  return out;
}

Sample StreamGenerator::next() {
  ++t_;
  Sample s;
  s.truth = draw_point(t_, s.theta, s.schedule_value);
  const Eigen::VectorXd x = add_noise(s.truth);
  std::vector<Eigen::Index> mask = draw_mask();
  Eigen::VectorXd values(static_cast<Eigen::Index>(mask.size()));
  for (std::size_t i = 0; i < mask.size(); ++i) values(static_cast<Eigen::Index>(i)) = x(mask[i]);
  s.obs.t = t_;
  s.obs.values = std::move(values);
  s.obs.omega = std::move(mask);
  const auto change = spec_.change_time();
  s.after_change = change.has_value() && t_ >= *change;
  return s;
}

double coherence(const Eigen::MatrixXd& basis) {
  const double dim = static_cast<double>(basis.rows());
  const double d = static_cast<double>(basis.cols());
  return dim / d * basis.rowwise().squaredNorm().maxCoeff();
}

ProjectionErrorBound projection_error_bound(const Eigen::VectorXd& v, const Eigen::VectorXd& center, const Eigen::MatrixXd& basis,
                             Eigen::Index observed, double noise_var, double failure_prob, double ell) {
  const double dim = static_cast<double>(basis.rows());
  const double d = static_cast<double>(basis.cols());
  const double n_obs = static_cast<double>(observed);
  const double slack = 1.0 - ell;

  ProjectionErrorBound out;
  const Eigen::VectorXd diff = v - center;
  const Eigen::VectorXd q = diff - basis * (basis.transpose() * diff);
  out.q_norm2 = q.squaredNorm();
  out.theta = out.q_norm2 > 0.0
                  ? std::sqrt(2.0 * dim * q.cwiseAbs2().maxCoeff() / out.q_norm2 * std::log(1.0 / failure_prob))
                  : 0.0;
  out.coherence = coherence(basis);

  const double subspace_term =
      2.0 * (1.0 + out.theta) * (1.0 + out.theta) / (slack * slack) * (d / n_obs) * out.coherence * out.q_norm2;
  const double noise_term = noise_var * (64.0 / 9.0) * dim * dim / (slack * slack * n_obs * n_obs);
  out.bound = subspace_term + noise_term;

  out.min_observed = std::max(8.0 / 3.0 * out.coherence * d * std::log(2.0 * d / failure_prob),
                              4.0 / 3.0 * dim / (slack * std::log(2.0 * dim / failure_prob)));
  out.preconditions_met = n_obs >= out.min_observed;
  return out;
}

}  // namespace mousse
