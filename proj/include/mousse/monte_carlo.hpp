#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "mousse/changepoint.hpp"

namespace mousse {

/// A residual stream for one Monte Carlo trial. The baseline has already been
/// estimated from the trial's own burn-in; `next` yields the residual at
/// stream time start_time, start_time + 1, ...
struct TrialStream {
  Baseline baseline;
  std::size_t start_time = 1;
  std::function<double()> next;
};

using TrialFactory = std::function<TrialStream(std::uint64_t trial_seed, std::size_t trial_index)>;

inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial_index) {
  return seed ^ static_cast<std::uint64_t>(trial_index);
}

// Runs fn(i) for i in [0, n) on `threads` workers (0 = hardware concurrency)
// and returns the results in index order. The first exception is rethrown.
template <class Fn>
auto run_trials(std::size_t n, unsigned threads, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<Result> results(n);
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

// ARL under an exponential stopping time: -m / ln(1 - p).
double arl_from_alarm_fraction(double p_hat, double horizon);

struct ArlEstimate {
  double arl = 0.0;
  double ci_low = 0.0;  // 95% interval from the binomial interval of p_hat
  double ci_high = 0.0;
  double p_hat = 0.0;
  std::size_t alarms = 0;
  std::size_t n_trials = 0;
  std::size_t horizon = 0;
  bool all_censored = false;  // no trial alarmed; arl is the lower bound horizon * n_trials
  bool exact_mean = false;    // every trial alarmed; arl is the sample mean of T
  std::vector<std::size_t> alarm_times;  // 0 for censored trials
};

// Stop-at-first runs of a fresh detector over `horizon` residuals per trial.
ArlEstimate mc_arl(const TrialFactory& factory, std::size_t window, double threshold, std::size_t horizon,
                   std::size_t n_trials, std::uint64_t seed, unsigned threads = 0);

struct DelayEstimate {
  double mean_delay = 0.0;
  double ci_half_width = 0.0;
  std::size_t detected = 0;
  std::size_t false_alarms = 0;  // alarms before the change time
  std::size_t missed = 0;        // no alarm by the horizon
  std::size_t n_trials = 0;
  std::vector<double> delays;    // T - change_time for detected trials, in trial order
};

// Stop-at-first runs; `change_time` and `horizon` are stream times.
DelayEstimate mc_delay(const TrialFactory& factory, std::size_t window, double threshold, std::size_t change_time,
                       std::size_t horizon, std::size_t n_trials, std::uint64_t seed, unsigned threads = 0);

struct ThresholdEstimate {
  double threshold = 0.0;
  double target_arl = 0.0;
  double alarm_probability = 0.0;  // 1 - exp(-horizon / target_arl)
  std::size_t horizon = 0;
  std::vector<double> max_statistics;  // per trial, in trial order
};

// Threshold at which the fraction of no-change trials alarming within
// `horizon` steps equals 1 - exp(-horizon / target_arl): the matching
// upper quantile of the per-trial maximum GLR statistic.
ThresholdEstimate mc_threshold(const TrialFactory& factory, std::size_t window, double target_arl,
                               std::size_t horizon, std::size_t n_trials, std::uint64_t seed, unsigned threads = 0);

// Factory of i.i.d. N(0, 1) residuals with baseline (0, 1).
TrialFactory gaussian_trials();

}  // namespace mousse
