#include "mousse/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "mousse/errors.hpp"

namespace mousse {

double arl_from_alarm_fraction(double p_hat, double horizon) {
  if (p_hat <= 0.0) return std::numeric_limits<double>::infinity();
  if (p_hat >= 1.0) return 0.0;
  return -horizon / std::log1p(-p_hat);
}

ArlEstimate mc_arl(const TrialFactory& factory, std::size_t window, double threshold, std::size_t horizon,
                   std::size_t n_trials, std::uint64_t seed, unsigned threads) {
  if (n_trials == 0) throw ConfigError("Monte Carlo needs at least one trial");
  if (horizon < window) throw ConfigError("Monte Carlo horizon must be at least the GLR window");

  ArlEstimate out;
  out.n_trials = n_trials;
  out.horizon = horizon;
  out.alarm_times = run_trials(n_trials, threads, [&](std::size_t i) -> std::size_t {
    TrialStream stream = factory(trial_seed(seed, i), i);
    GlrDetector detector(window, threshold, AlarmPolicy::Stop);
    detector.set_baseline(stream.baseline);
    for (std::size_t t = 1; t <= horizon; ++t)
      if (detector.update(stream.next()).alarm) return t;
    return 0;
  });
  for (std::size_t t : out.alarm_times) out.alarms += t > 0 ? 1 : 0;

  const double n = static_cast<double>(n_trials);
  const double m = static_cast<double>(horizon);
  out.p_hat = static_cast<double>(out.alarms) / n;
  if (out.alarms == 0) {
    out.all_censored = true;
    out.arl = m * n;
    out.ci_low = out.arl;
    out.ci_high = std::numeric_limits<double>::infinity();
    return out;
  }
  if (out.alarms == n_trials) {
    out.exact_mean = true;
    double sum = 0.0;
    double sum2 = 0.0;
    for (std::size_t t : out.alarm_times) {
      sum += static_cast<double>(t);
      sum2 += static_cast<double>(t) * static_cast<double>(t);
    }
    out.arl = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum2 - n * out.arl * out.arl) / (n - 1)) : 0.0;
    const double half = 1.96 * std::sqrt(var / n);
    out.ci_low = out.arl - half;
    out.ci_high = out.arl + half;
    return out;
  }
  out.arl = arl_from_alarm_fraction(out.p_hat, m);
  // The estimator is decreasing in p_hat, so the interval ends swap.
  const double half = 1.96 * std::sqrt(out.p_hat * (1.0 - out.p_hat) / n);
  out.ci_low = arl_from_alarm_fraction(std::min(1.0, out.p_hat + half), m);
  out.ci_high = arl_from_alarm_fraction(std::max(0.0, out.p_hat - half), m);
  return out;
}

DelayEstimate mc_delay(const TrialFactory& factory, std::size_t window, double threshold, std::size_t change_time,
                       std::size_t horizon, std::size_t n_trials, std::uint64_t seed, unsigned threads) {
  if (n_trials == 0) throw ConfigError("Monte Carlo needs at least one trial");
  if (change_time >= horizon) throw ConfigError("change time must precede the horizon");

  // Alarm stream time, or 0 if none by the horizon.
  const auto alarm_times = run_trials(n_trials, threads, [&](std::size_t i) -> std::size_t {
    TrialStream stream = factory(trial_seed(seed, i), i);
    GlrDetector detector(window, threshold, AlarmPolicy::Stop);
    detector.set_baseline(stream.baseline);
    for (std::size_t t = stream.start_time; t <= horizon; ++t)
      if (detector.update(stream.next()).alarm) return t;
    return 0;
  });

  DelayEstimate out;
  out.n_trials = n_trials;
  for (std::size_t t : alarm_times) {
    if (t == 0) {
      ++out.missed;
    } else if (t < change_time) {
      ++out.false_alarms;
    } else {
      out.delays.push_back(static_cast<double>(t - change_time));
    }
  }
  out.detected = out.delays.size();
  if (out.detected > 0) {
    const double n = static_cast<double>(out.detected);
    double sum = 0.0;
    for (double d : out.delays) sum += d;
    out.mean_delay = sum / n;
    double ss = 0.0;
    for (double d : out.delays) ss += (d - out.mean_delay) * (d - out.mean_delay);
    out.ci_half_width = out.detected > 1 ? 1.96 * std::sqrt(ss / (n - 1) / n) : std::numeric_limits<double>::infinity();
  }
  return out;
}

ThresholdEstimate mc_threshold(const TrialFactory& factory, std::size_t window, double target_arl,
                               std::size_t horizon, std::size_t n_trials, std::uint64_t seed, unsigned threads) {
  if (n_trials == 0) throw ConfigError("Monte Carlo needs at least one trial");
  if (!(target_arl > 1.0)) throw ConfigError("target ARL must exceed 1");

  ThresholdEstimate out;
  out.target_arl = target_arl;
  out.horizon = horizon;
  out.alarm_probability = -std::expm1(-static_cast<double>(horizon) / target_arl);
  out.max_statistics = run_trials(n_trials, threads, [&](std::size_t i) {
    TrialStream stream = factory(trial_seed(seed, i), i);
    GlrDetector detector(window, std::numeric_limits<double>::infinity(), AlarmPolicy::Stop);
    detector.set_baseline(stream.baseline);
    double best = 0.0;
    for (std::size_t t = 1; t <= horizon; ++t) best = std::max(best, detector.update(stream.next()).statistic);
    return best;
  });

  // A trial alarms within the horizon iff its maximum reaches b, so b is the
  // (1 - p) empirical quantile of the maxima.
  std::vector<double> sorted = out.max_statistics;
  std::sort(sorted.begin(), sorted.end());
  const double rank = (1.0 - out.alarm_probability) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  out.threshold = sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  return out;
}

TrialFactory gaussian_trials() {
  return [](std::uint64_t seed, std::size_t) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    TrialStream stream;
    stream.next = [rng, dist = std::normal_distribution<double>(0.0, 1.0)]() mutable { return dist(*rng); };
    return stream;
  };
}

}  // namespace mousse
