#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace mousse {

// Denominator of nu(x): (x/2) Phi(x/2) + phi(x)/2 (AsPrinted) or
// (x/2) Phi(x/2) + phi(x/2) (HalfArg).
enum class NuVariant { AsPrinted, HalfArg };

const char* nu_variant_name(NuVariant variant);
NuVariant nu_variant_from(std::string_view name);  // throws ConfigError

// What the detector does after an alarm. Stop keeps the window untouched so
// the caller can end the run; ResetAndContinue clears the window so later
// statistics only see residuals after the alarm.
enum class AlarmPolicy { Stop, ResetAndContinue };

struct Baseline {
  double mu0 = 0.0;
  double sigma0 = 1.0;
};

// Sample mean and unbiased standard deviation of the first n_burn residuals.
// Throws InsufficientData if fewer than n_burn (or n_burn < 2) values are
// given, DegenerateBaseline if sigma0 < 1e-12.
Baseline calibrate(std::span<const double> residuals, std::size_t n_burn);

struct GlrUpdate {
  double statistic = 0.0;
  bool alarm = false;
};

/// Windowed two-sided GLR for a mean shift in Gaussian residuals:
/// max over lags 1..w of |S_t - S_{t-lag}| / sqrt(lag) on standardized data.
class GlrDetector {
 public:
  GlrDetector(std::size_t window, double threshold, AlarmPolicy policy = AlarmPolicy::ResetAndContinue);

  void set_baseline(Baseline baseline);
  bool calibrated() const { return baseline_.has_value(); }
  const std::optional<Baseline>& baseline() const { return baseline_; }

  // Throws NotCalibrated before set_baseline.
  GlrUpdate update(double e);
  // Statistic of the current window without adding a sample.
  double statistic() const;
  void clear();

  std::size_t window() const { return window_; }
  double threshold() const { return threshold_; }
  void set_threshold(double b) { threshold_ = b; }
  AlarmPolicy policy() const { return policy_; }
  std::size_t alarm_count() const { return alarms_; }
  std::size_t buffered() const { return count_; }
  // Standardized residuals in the window, oldest first.
  std::vector<double> buffer() const;

 private:
  std::size_t window_;
  double threshold_;
  AlarmPolicy policy_;
  std::optional<Baseline> baseline_;
  std::vector<double> ring_;
  std::size_t head_ = 0;  // slot of the next write
  std::size_t count_ = 0;
  std::size_t alarms_ = 0;
};

// Continuous in x >= 0 with nu(0) = 2 (AsPrinted) or 1 (HalfArg).
double nu(double x, NuVariant variant);

// sqrt(2 pi) exp(b^2/2) / (b * int_0^b x nu(x)^2 dx), with adaptive
// Gauss-Kronrod quadrature.
double arl_approx(double b, NuVariant variant, double tolerance = 1e-10);

// Bisection on [2, 12] to relative ARL error below 1e-9. Throws NoBracket
// if target lies outside [arl_approx(2), arl_approx(12)].
double threshold_for_arl(double target_arl, NuVariant variant);

// Reference thresholds for target ARL 1000, 5000, 10000.
inline constexpr std::array<double, 3> kReferenceArls{1000.0, 5000.0, 10000.0};
inline constexpr std::array<double, 3> kReferenceThresholds{3.94, 4.35, 4.52};
inline constexpr double kReferenceTolerance = 0.1;

struct NuSelfTest {
  std::array<double, 3> as_printed{};
  std::array<double, 3> half_arg{};
  bool as_printed_ok = false;
  bool half_arg_ok = false;
  NuVariant selected = NuVariant::AsPrinted;
};

// Solves the reference ARLs with both variants and selects the one matching
// the reference thresholds (AsPrinted wins ties).
NuSelfTest nu_self_test();
// Cached nu_self_test().selected.
NuVariant default_nu_variant();

}  // namespace mousse
