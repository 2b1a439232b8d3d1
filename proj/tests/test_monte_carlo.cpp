#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mousse/errors.hpp"
#include "mousse/monte_carlo.hpp"

using namespace mousse;

namespace {

// Residuals that are zero except for a spike of `height` at stream time
// spike(trial_index); no spike when it returns 0.
TrialFactory spike_trials(std::function<std::size_t(std::size_t)> spike, std::size_t start_time = 1,
                          double height = 100.0) {
  return [spike, start_time, height](std::uint64_t, std::size_t index) {
    TrialStream stream;
    stream.baseline = {0.0, 1.0};
    stream.start_time = start_time;
    const std::size_t at = spike(index);
    stream.next = [t = start_time, at, height]() mutable { return t++ == at ? height : 0.0; };
    return stream;
  };
}

}  // namespace

TEST_SUITE("monte_carlo") {
  TEST_CASE("the exponential estimator inverts the alarm probability") {
    for (double arl : {10.0, 1000.0, 12345.0}) {
      const double m = 0.5 * arl;
      CHECK(arl_from_alarm_fraction(-std::expm1(-m / arl), m) == doctest::Approx(arl).epsilon(1e-12));
    }
    CHECK(std::isinf(arl_from_alarm_fraction(0.0, 10.0)));
    CHECK(arl_from_alarm_fraction(1.0, 10.0) == 0.0);
  }

  TEST_CASE("run_trials returns results in index order for any thread count") {
    auto square = [](std::size_t i) { return i * i; };
    const auto one = run_trials(257, 1, square);
    const auto many = run_trials(257, 4, square);
    CHECK(one == many);
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i] == i * i);
    CHECK(run_trials(0, 3, square).empty());
  }

  TEST_CASE("run_trials rethrows worker failures") {
    auto failing = [](std::size_t i) -> int {
      if (i == 17) throw std::runtime_error("trial 17");
      return 0;
    };
    CHECK_THROWS_WITH_AS(run_trials(40, 3, failing), "trial 17", std::runtime_error);
  }

  TEST_CASE("trial seeds are distinct and reproducible") {
    CHECK(trial_seed(5, 0) == 5);
    CHECK(trial_seed(5, 1) != trial_seed(5, 2));
    CHECK(trial_seed(9, 3) == trial_seed(9, 3));
  }

  TEST_CASE("ARL estimation records alarm times and handles censoring") {
    SUBCASE("mixed alarms use the exponential estimator") {
      const auto factory = spike_trials([](std::size_t i) { return i % 2 == 0 ? 10 + i : 0; });
      const ArlEstimate a = mc_arl(factory, 5, 4.0, 100, 10, 1, 2);
      CHECK(a.alarms == 5);
      CHECK(a.alarm_times[0] == 10);
      CHECK(a.alarm_times[4] == 14);
      CHECK(a.alarm_times[1] == 0);
      CHECK(a.p_hat == 0.5);
      CHECK(a.arl == doctest::Approx(100.0 / std::log(2.0)));
      CHECK(a.ci_low < a.arl);
      CHECK(a.ci_high > a.arl);
    }
    SUBCASE("no alarms report a lower bound") {
      const ArlEstimate a = mc_arl(spike_trials([](std::size_t) { return 0; }), 5, 4.0, 50, 8, 1);
      CHECK(a.all_censored);
      CHECK(a.arl == 400.0);
      CHECK(std::isinf(a.ci_high));
    }
    SUBCASE("all alarms use the sample mean") {
      const ArlEstimate a = mc_arl(spike_trials([](std::size_t i) { return 10 + 2 * i; }), 5, 4.0, 50, 5, 1);
      CHECK(a.exact_mean);
      CHECK(a.arl == doctest::Approx(14.0));
    }
    CHECK_THROWS_AS(mc_arl(gaussian_trials(), 10, 3.0, 5, 10, 1), ConfigError);
    CHECK_THROWS_AS(mc_arl(gaussian_trials(), 10, 3.0, 50, 0, 1), ConfigError);
  }

  TEST_CASE("delay estimation classifies false alarms, detections and misses") {
    // Stream time starts at 51; change at 100; horizon 200.
    const auto factory = spike_trials(
        [](std::size_t i) -> std::size_t {
          switch (i % 4) {
            case 0: return 80;   // false alarm
            case 1: return 103;  // delay 3
            case 2: return 110;  // delay 10
            default: return 0;   // missed
          }
        },
        51);
    const DelayEstimate d = mc_delay(factory, 20, 4.0, 100, 200, 8, 1, 3);
    CHECK(d.false_alarms == 2);
    CHECK(d.missed == 2);
    CHECK(d.detected == 4);
    CHECK(d.mean_delay == doctest::Approx(6.5));
    CHECK(d.delays == std::vector<double>{3.0, 10.0, 3.0, 10.0});
    CHECK(d.ci_half_width > 0.0);
    CHECK_THROWS_AS(mc_delay(factory, 20, 4.0, 200, 200, 8, 1), ConfigError);
  }

  TEST_CASE("the Monte Carlo threshold is the matching quantile of trial maxima") {
    const std::size_t n = 400;
    const std::size_t horizon = 300;
    const double target = 2000.0;
    const ThresholdEstimate est = mc_threshold(gaussian_trials(), 50, target, horizon, n, 7, 2);
    CHECK(est.alarm_probability == doctest::Approx(1.0 - std::exp(-0.15)));
    std::size_t above = 0;
    for (double m : est.max_statistics) above += m >= est.threshold ? 1 : 0;
    const double fraction = static_cast<double>(above) / static_cast<double>(n);
    CHECK(std::abs(fraction - est.alarm_probability) <= 1.0 / static_cast<double>(n) + 1e-12);

    // Re-running the detector at the estimated threshold alarms on the same trials.
    const ArlEstimate check = mc_arl(gaussian_trials(), 50, est.threshold, horizon, n, 7, 2);
    CHECK(check.alarms == above);
  }

  TEST_CASE("Monte Carlo runs are identical across thread counts") {
    const ArlEstimate a = mc_arl(gaussian_trials(), 30, 3.0, 400, 64, 11, 1);
    const ArlEstimate b = mc_arl(gaussian_trials(), 30, 3.0, 400, 64, 11, 4);
    CHECK(a.alarm_times == b.alarm_times);
  }

  TEST_CASE("Gaussian trials are standard normal and seeded") {
    const auto factory = gaussian_trials();
    TrialStream s1 = factory(3, 0);
    TrialStream s2 = factory(3, 0);
    double sum = 0.0;
    double sum2 = 0.0;
    bool same = true;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double x = s1.next();
      same = same && x == s2.next();
      sum += x;
      sum2 += x * x;
    }
    CHECK(same);
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sum2 / n - 1.0) < 0.02);
  }
}
