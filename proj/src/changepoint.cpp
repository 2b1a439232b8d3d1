#include "mousse/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mousse/errors.hpp"

namespace mousse {

const char* nu_variant_name(NuVariant variant) {
  return variant == NuVariant::AsPrinted ? "as-printed" : "half-arg";
}

NuVariant nu_variant_from(std::string_view name) {
  if (name == "as-printed") return NuVariant::AsPrinted;
  if (name == "half-arg") return NuVariant::HalfArg;
  throw ConfigError("unknown nu variant '" + std::string(name) + "' (expected as-printed or half-arg)");
}

Baseline calibrate(std::span<const double> residuals, std::size_t n_burn) {
  if (n_burn < 2) throw InsufficientData("baseline calibration needs n_burn >= 2");
  if (residuals.size() < n_burn)
    throw InsufficientData("baseline calibration needs " + std::to_string(n_burn) + " residuals, got " +
                           std::to_string(residuals.size()));
  const auto burn = residuals.first(n_burn);
  double mean = 0.0;
  for (double e : burn) mean += e;
  mean /= static_cast<double>(n_burn);
  double ss = 0.0;
  for (double e : burn) ss += (e - mean) * (e - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n_burn - 1));
  if (!(sd >= 1e-12)) throw DegenerateBaseline("baseline residual standard deviation is below 1e-12");
  return {mean, sd};
}

GlrDetector::GlrDetector(std::size_t window, double threshold, AlarmPolicy policy)
    : window_(window), threshold_(threshold), policy_(policy), ring_(window, 0.0) {
  if (window == 0) throw ConfigError("GLR window must be positive");
  if (!(threshold > 0.0)) throw ConfigError("GLR threshold must be positive");
}

void GlrDetector::set_baseline(Baseline baseline) {
  if (!(baseline.sigma0 > 0.0)) throw DegenerateBaseline("baseline sigma0 must be positive");
  baseline_ = baseline;
}

double GlrDetector::statistic() const {
  // Partial sums walk backwards from the newest sample, so each lag's window
  // sum S_t - S_{t-lag} is formed directly and no long-running cumulative sum
  // can drift.
  double sum = 0.0;
  double best = 0.0;
  std::size_t slot = head_;
  for (std::size_t lag = 1; lag <= count_; ++lag) {
    slot = slot == 0 ? window_ - 1 : slot - 1;
    sum += ring_[slot];
    best = std::max(best, std::abs(sum) / std::sqrt(static_cast<double>(lag)));
  }
  return best;
}

GlrUpdate GlrDetector::update(double e) {
  if (!baseline_) throw NotCalibrated("GLR detector used before its baseline was set");
  ring_[head_] = (e - baseline_->mu0) / baseline_->sigma0;
  head_ = (head_ + 1) % window_;
  count_ = std::min(count_ + 1, window_);

  GlrUpdate out;
  out.statistic = statistic();
  out.alarm = out.statistic >= threshold_;
  if (out.alarm) {
    ++alarms_;
    if (policy_ == AlarmPolicy::ResetAndContinue) clear();
  }
  return out;
}

void GlrDetector::clear() {
  head_ = 0;
  count_ = 0;
}

std::vector<double> GlrDetector::buffer() const {
  std::vector<double> out;
  out.reserve(count_);
  std::size_t slot = (head_ + window_ - count_) % window_;
  for (std::size_t i = 0; i < count_; ++i) {
    out.push_back(ring_[slot]);
    slot = (slot + 1) % window_;
  }
  return out;
}

namespace {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

double nu(double x, NuVariant variant) {
  const double limit = variant == NuVariant::AsPrinted ? 2.0 : 1.0;
  if (x <= 0.0) return limit;
  // Phi(x/2) - 1/2 through erf keeps full precision for small x.
  const double centered = 0.5 * std::erf(x / (2.0 * std::numbers::sqrt2));
  const double numerator = (2.0 / x) * centered;
  const double tail = variant == NuVariant::AsPrinted ? 0.5 * normal_pdf(x) : normal_pdf(0.5 * x);
  const double denominator = 0.5 * x * normal_cdf(0.5 * x) + tail;
  return numerator / denominator;
}

double arl_approx(double b, NuVariant variant, double tolerance) {
  if (!(b > 0.0)) throw ConfigError("ARL approximation needs b > 0");
  auto integrand = [variant](double x) {
    const double v = nu(x, variant);
    return x * v * v;
  };
  double error = 0.0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, b, 20, tolerance, &error);
  return std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * b * b) / (b * integral);
}

double threshold_for_arl(double target_arl, NuVariant variant) {
  // The approximation dips below b ~ 1.4 and is increasing from there on.
  constexpr double kLow = 2.0;
  constexpr double kHigh = 12.0;
  if (!(target_arl > 1.0)) throw NoBracket("target ARL must exceed 1");
  double lo = kLow;
  double hi = kHigh;
  const double arl_lo = arl_approx(lo, variant);
  const double arl_hi = arl_approx(hi, variant);
  if (target_arl < arl_lo || target_arl > arl_hi)
    throw NoBracket("target ARL " + std::to_string(target_arl) + " is outside [" + std::to_string(arl_lo) + ", " +
                    std::to_string(arl_hi) + "]");
  for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double arl = arl_approx(mid, variant);
    if (std::abs(arl / target_arl - 1.0) < 1e-12) return mid;
    (arl < target_arl ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

NuSelfTest nu_self_test() {
  NuSelfTest out;
  out.as_printed_ok = true;
  out.half_arg_ok = true;
  for (std::size_t i = 0; i < kReferenceArls.size(); ++i) {
    out.as_printed[i] = threshold_for_arl(kReferenceArls[i], NuVariant::AsPrinted);
    out.half_arg[i] = threshold_for_arl(kReferenceArls[i], NuVariant::HalfArg);
    out.as_printed_ok = out.as_printed_ok && std::abs(out.as_printed[i] - kReferenceThresholds[i]) <= kReferenceTolerance;
    out.half_arg_ok = out.half_arg_ok && std::abs(out.half_arg[i] - kReferenceThresholds[i]) <= kReferenceTolerance;
  }
  out.selected = !out.as_printed_ok && out.half_arg_ok ? NuVariant::HalfArg : NuVariant::AsPrinted;
  return out;
}

NuVariant default_nu_variant() {
  static const NuVariant selected = nu_self_test().selected;
  return selected;
}

}  // namespace mousse
