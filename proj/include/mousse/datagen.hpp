#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mousse/subset_model.hpp"

namespace mousse {

// Width schedules for the Gaussian-bump manifold.
struct StaticGamma {
  double gamma = 0.6;
};
// gamma_t = start - gamma0 t for t <= period, then start - gamma0 (2 period - t).
struct SlowGamma {
  double gamma0 = 2e-4;
  std::size_t period = 1000;
  double start = 0.6;
};
// gamma_t = start - gamma0 t before change_time and
// gamma_{change_time - 1} - jump - gamma0 t from change_time on. The drop at
// change_time is jump + gamma0 change_time, larger than `jump` alone.
struct JumpGamma {
  double gamma0 = 2e-4;
  double jump = 0.05;
  std::size_t change_time = 200;
  double start = 0.6;
};
using GammaSchedule = std::variant<StaticGamma, SlowGamma, JumpGamma>;

double gamma_at(const GammaSchedule& schedule, std::size_t t);

// Chirp rate k_t = rate t for t <= period, then rate (2 period - t).
struct ChirpSchedule {
  double rate = 0.1;
  std::size_t period = 1000;
};

double chirp_rate_at(const ChirpSchedule& schedule, std::size_t t);

struct BumpManifold {
  Eigen::Index ambient_dim = 100;
  GammaSchedule gamma = StaticGamma{};
};
struct ChirpManifold {
  Eigen::Index ambient_dim = 100;
  ChirpSchedule schedule{};
};

struct ManifoldSpec {
  std::variant<BumpManifold, ChirpManifold> manifold = BumpManifold{};
  double noise_var = 4e-4;
  double missing_frac = 0.0;
  std::uint64_t seed = 1;

  Eigen::Index ambient_dim() const;
  int intrinsic_dim() const;  // 1 for the bump, 2 for the chirp
  Eigen::Index observed_count() const;
  std::optional<std::size_t> change_time() const;
  void validate() const;  // throws ConfigError
};

// [v]_n = exp(-(z_n - theta)^2 / (2 gamma^2)) / sqrt(2 pi), z_n = -2 + 4n/D, n = 1..D
Eigen::VectorXd bump_point(double theta, double gamma, Eigen::Index ambient_dim);
// [v]_n = sin(2 pi (f0 z_n + k^2 z_n^2 / 2 + phase)), z_n = 1e-4 n, n = 1..D
Eigen::VectorXd chirp_point(double f0, double phase, double k, Eigen::Index ambient_dim);

struct Sample {
  Observation obs;
  Eigen::VectorXd truth;       // noiseless point v_t
  std::vector<double> theta;   // manifold coordinates used for v_t
  double schedule_value = 0.0; // gamma_t or k_t
  bool after_change = false;
};

/// Deterministic sampler of x_t = v_t + w_t with a uniformly random
/// observation mask per step.
class StreamGenerator {
 public:
  explicit StreamGenerator(ManifoldSpec spec);

  // Complete noisy samples drawn at the schedule's t = 1; does not advance time.
  std::vector<Eigen::VectorXd> training_batch(std::size_t n);
  // Next step t = 1, 2, ...
  Sample next();

  std::size_t time() const { return t_; }
  const ManifoldSpec& spec() const { return spec_; }

 private:
  Eigen::VectorXd draw_point(std::size_t t, std::vector<double>& theta, double& schedule_value);
  Eigen::VectorXd add_noise(const Eigen::VectorXd& v);
  std::vector<Eigen::Index> draw_mask();

  ManifoldSpec spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_;
  std::vector<Eigen::Index> indices_;
  std::size_t t_ = 0;
};

struct ProjectionErrorBound {
  double bound = 0.0;
  bool preconditions_met = false;
  double coherence = 0.0;
  double theta = 0.0;
  double q_norm2 = 0.0;
  double min_observed = 0.0;  // smallest |Omega| allowed by the sample-size condition
};

// (D/d) max_m ||U U^# e_m||^2 for orthonormal U, i.e. (D/d) times the largest row norm squared.
double coherence(const Eigen::MatrixXd& basis);

// High-probability bound on ||beta_Omega - beta||^2 for x = v + w with
// w ~ N(0, noise_var I), holding with probability >= 1 - 3 failure_prob when
// |Omega| meets the sample-size condition.
ProjectionErrorBound projection_error_bound(const Eigen::VectorXd& v, const Eigen::VectorXd& center, const Eigen::MatrixXd& basis,
                             Eigen::Index observed, double noise_var, double failure_prob, double ell = 0.5);

}  // namespace mousse
