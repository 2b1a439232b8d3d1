#pragma once

#include <string>

#include "mousse/monte_carlo.hpp"
#include "mousse/run_config.hpp"

namespace mousse {

// Monte Carlo trials that generate a stream from `cfg.manifold` (seeded per
// trial), initialize a tree from n_init training samples, track `warmup`
// steps, calibrate the baseline on the next n_burn residuals and then yield
// residuals.
TrialFactory tracking_trials(const RunConfig& cfg, TrackingMode mode);

struct MethodArl {
  double mc_threshold = 0.0;  // calibrated for the target ARL
  ArlEstimate at_theory;      // MC ARL at the theoretical threshold
};

struct ArlTableRow {
  double arl_target = 0.0;
  double theory_threshold = 0.0;
  std::string variant;
  double missing_frac = 0.0;
  std::size_t n_trials = 0;
  std::size_t horizon = 0;
  std::size_t window = 0;
  bool detector_only = false;
  MethodArl mousse;
  MethodArl single;
  ArlEstimate gaussian;  // detector-only run
};

// Threshold table row: theoretical b plus MC thresholds and MC ARL for both
// tracking methods, or the i.i.d. Gaussian detector-only check.
ArlTableRow arl_table_row(const RunConfig& cfg, std::size_t n_trials, std::size_t horizon, bool detector_only,
                          unsigned threads = 0);
std::string to_json(const ArlTableRow& row);

struct MethodDelay {
  double threshold = 0.0;
  DelayEstimate delay;
};

struct DelayTableRow {
  double arl_target = 0.0;
  double jump = 0.0;
  std::size_t change_time = 0;
  double missing_frac = 0.0;
  std::size_t n_trials = 0;
  std::size_t calibration_trials = 0;
  std::size_t calibration_horizon = 0;
  MethodDelay mousse;
  MethodDelay single;
};

// Per method: MC threshold for the target ARL on no-change streams, then the
// mean detection delay after the configured jump. Requires a jump schedule.
DelayTableRow delay_table_row(const RunConfig& cfg, std::size_t n_trials, std::size_t calibration_trials,
                              std::size_t calibration_horizon, std::size_t delay_horizon, unsigned threads = 0);
std::string to_json(const DelayTableRow& row);

}  // namespace mousse
