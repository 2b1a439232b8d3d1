#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mousse/changepoint.hpp"
#include "mousse/datagen.hpp"
#include "mousse/experiments.hpp"
#include "mousse/monte_carlo.hpp"
#include "mousse/pipeline.hpp"
#include "mousse/run_config.hpp"
#include "mousse/stream_io.hpp"
#include "mousse/subset_model.hpp"
#include "properties.hpp"

using namespace mousse;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;  // informational, never change the verdict
};

std::string fmt(const char* format, auto... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

RunConfig settings(std::initializer_list<std::pair<const char*, std::string>> kv) {
  RunConfig cfg;
  for (const auto& [k, v] : kv) apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

struct Trace {
  std::vector<double> e;
  std::vector<double> eps;
  std::vector<std::size_t> k;  // k[t - 1] is K_t
};

Trace track(const RunConfig& cfg) {
  StreamGenerator gen(cfg.manifold);
  MousseTree tree = initial_tree(gen.training_batch(cfg.n_init), cfg);
  Trace out;
  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    const StepResult r = tree.step(gen.next().obs);
    out.e.push_back(r.e);
    out.eps.push_back(r.eps);
    out.k.push_back(r.k);
  }
  return out;
}

// Static bump: D = 100, d = 1, sigma^2 = 4e-4, alpha = 0.95, eps = mu = 0.1, PETRELS-FO.
RunConfig static_config(const std::string& residual_average) {
  return settings({{"manifold.kind", "bump"},
                   {"manifold.dim", "100"},
                   {"manifold.schedule", "static"},
                   {"manifold.gamma", "0.6"},
                   {"manifold.noise_var", "4e-4"},
                   {"manifold.missing_frac", "0"},
                   {"mousse.d", "1"},
                   {"mousse.alpha", "0.95"},
                   {"mousse.tolerance", "0.1"},
                   {"mousse.mu", "0.1"},
                   {"mousse.tracker", "petrels-fo"},
                   {"mousse.residual_average", residual_average},
                   {"horizon", "2000"},
                   {"n_init", "200"},
                   {"seed", "2024"}});
}

// Slow drift: gamma0 = 2e-4, s = 1000, alpha = 0.9, eps = mu = 0.1, PETRELS-FO, 40% missing.
RunConfig slow_config(const std::string& residual_average) {
  return settings({{"manifold.kind", "bump"},
                   {"manifold.dim", "100"},
                   {"manifold.schedule", "slow"},
                   {"manifold.gamma", "0.6"},
                   {"manifold.gamma0", "2e-4"},
                   {"manifold.period", "1000"},
                   {"manifold.noise_var", "4e-4"},
                   {"manifold.missing_frac", "0.4"},
                   {"mousse.d", "1"},
                   {"mousse.alpha", "0.9"},
                   {"mousse.tolerance", "0.1"},
                   {"mousse.mu", "0.1"},
                   {"mousse.tracker", "petrels-fo"},
                   {"mousse.residual_average", residual_average},
                   {"horizon", "2000"},
                   {"n_init", "200"},
                   {"seed", "2025"}});
}

// Jump of 0.05 at t = 200 on the slowly drifting bump, ARL 1000 calibration.
RunConfig delay_config(double missing) {
  return settings({{"manifold.kind", "bump"},
                   {"manifold.dim", "100"},
                   {"manifold.schedule", "jump"},
                   {"manifold.gamma", "0.6"},
                   {"manifold.gamma0", "2e-4"},
                   {"manifold.jump", "0.05"},
                   {"manifold.change_time", "200"},
                   {"manifold.noise_var", "4e-4"},
                   {"manifold.missing_frac", format_double(missing)},
                   {"mousse.d", "1"},
                   {"mousse.alpha", "0.9"},
                   {"mousse.tolerance", "0.1"},
                   {"mousse.mu", "0.1"},
                   {"mousse.tracker", "petrels-fo"},
                   {"detector.target_arl", "1000"},
                   {"detector.window", "20"},
                   {"detector.warmup", "100"},
                   {"detector.n_burn", "50"},
                   {"n_init", "200"},
                   {"seed", "7"}});
}

constexpr std::size_t kSteadyFrom = 300;  // steps t > 300 count as steady state

double mean_after(const std::vector<double>& v, std::size_t from) {
  double sum = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) sum += v[i];
  return sum / static_cast<double>(v.size() - from);
}

bool k_constant_tail(const std::vector<std::size_t>& k, std::size_t n) {
  return std::all_of(k.end() - static_cast<std::ptrdiff_t>(n), k.end(), [&](std::size_t x) { return x == k.back(); });
}

Verdict threshold_table() {
  const NuSelfTest self = nu_self_test();
  Verdict v;
  v.pass = self.as_printed_ok || self.half_arg_ok;
  v.detail = fmt("selected %s; as-printed b = %.4f, %.4f, %.4f; half-arg b = %.4f, %.4f, %.4f (reference 3.94, 4.35, 4.52 +- 0.1)",
                 nu_variant_name(self.selected), self.as_printed[0], self.as_printed[1], self.as_printed[2],
                 self.half_arg[0], self.half_arg[1], self.half_arg[2]);
  return v;
}

Verdict detector_only_arl(unsigned threads) {
  const DetectorConfig det;
  const double b = threshold_for_arl(1000.0, default_nu_variant());
  const ArlEstimate a = mc_arl(gaussian_trials(), det.window, b, 5000, 2000, 1, threads);
  Verdict v;
  v.pass = a.arl >= 700.0 && a.arl <= 1400.0;
  v.detail = fmt("b = %.4f (%s), window %zu: MC ARL %.1f [%.1f, %.1f] over 2000 trials of 5000 steps (target [700, 1400])", b,
                 nu_variant_name(default_nu_variant()), det.window, a.arl, a.ci_low, a.ci_high);
  const double b_half = threshold_for_arl(1000.0, NuVariant::HalfArg);
  const ArlEstimate h = mc_arl(gaussian_trials(), det.window, b_half, 5000, 2000, 1, threads);
  v.notes.push_back(fmt("half-arg b = %.4f gives MC ARL %.1f [%.1f, %.1f]", b_half, h.arl, h.ci_low, h.ci_high));
  return v;
}

Verdict static_tracking() {
  const Trace tr = track(static_config("sum"));
  const double mean_eps = mean_after(tr.eps, kSteadyFrom);
  const bool k_flat = k_constant_tail(tr.k, 500);
  Verdict v;
  v.pass = mean_eps < 0.1 && k_flat;
  v.detail = fmt("mean eps_t over t > 300 = %.4f (< 0.1), K constant over the last 500 steps: %s (K = %zu)", mean_eps,
                 k_flat ? "yes" : "no", tr.k.back());
  const Trace avg = track(static_config("average"));
  v.notes.push_back(fmt("with the (1 - alpha)-weighted average: mean eps_t = %.4f, K constant over the last 500: %s",
                        mean_after(avg.eps, kSteadyFrom), k_constant_tail(avg.k, 500) ? "yes" : "no"));
  return v;
}

struct DriftStats {
  std::size_t k100 = 0;
  std::size_t k_peak = 0;
  std::size_t k1900 = 0;
  double below = 0.0;
};

DriftStats drift_stats(const Trace& tr, double tolerance) {
  DriftStats s;
  s.k100 = tr.k[99];
  s.k1900 = tr.k[1899];
  s.k_peak = *std::max_element(tr.k.begin() + 799, tr.k.begin() + 1200);
  std::size_t hits = 0;
  for (std::size_t i = kSteadyFrom; i < tr.eps.size(); ++i) hits += tr.eps[i] < 2.0 * tolerance ? 1 : 0;
  s.below = static_cast<double>(hits) / static_cast<double>(tr.eps.size() - kSteadyFrom);
  return s;
}

Verdict slow_drift() {
  const RunConfig cfg = slow_config("sum");
  const DriftStats s = drift_stats(track(cfg), cfg.mousse.tolerance);
  Verdict v;
  v.pass = s.k_peak > s.k100 && s.k_peak > s.k1900 && s.below >= 0.95;
  v.detail = fmt("max K over [800, 1200] = %zu vs K_100 = %zu and K_1900 = %zu; eps_t < 2 eps on %.1f%% of steps t > 300 (>= 95%%)",
                 s.k_peak, s.k100, s.k1900, 100.0 * s.below);
  const RunConfig avg_cfg = slow_config("average");
  const DriftStats a = drift_stats(track(avg_cfg), avg_cfg.mousse.tolerance);
  v.notes.push_back(fmt("with the (1 - alpha)-weighted average: max K = %zu vs %zu and %zu; eps_t < 2 eps on %.1f%%", a.k_peak,
                        a.k100, a.k1900, 100.0 * a.below));
  return v;
}

DelayTableRow delay_row(double missing, unsigned threads) {
  return delay_table_row(delay_config(missing), 300, 300, 250, 400, threads);
}

std::string describe(const DelayTableRow& row) {
  return fmt("%.0f%% missing: MOUSSE delay %.2f +- %.2f (b = %.3f, %zu detected, %zu false, %zu missed), single subspace %.2f +- %.2f "
             "(b = %.3f, %zu detected, %zu false, %zu missed)",
             100.0 * row.missing_frac, row.mousse.delay.mean_delay, row.mousse.delay.ci_half_width, row.mousse.threshold,
             row.mousse.delay.detected, row.mousse.delay.false_alarms, row.mousse.delay.missed, row.single.delay.mean_delay,
             row.single.delay.ci_half_width, row.single.threshold, row.single.delay.detected, row.single.delay.false_alarms,
             row.single.delay.missed);
}

Verdict delay_ordering(const DelayTableRow& row) {
  const double m = row.mousse.delay.mean_delay;
  const double s = row.single.delay.mean_delay;
  Verdict v;
  v.pass = row.mousse.delay.detected > 0 && row.single.delay.detected > 0 && m <= 15.0 && s >= 40.0 && m < s / 3.0;
  v.detail = describe(row) + " (need MOUSSE <= 15, single >= 40, ratio < 1/3)";
  return v;
}

Verdict missing_robustness(const DelayTableRow& full, const DelayTableRow& missing) {
  const double ratio = missing.mousse.delay.mean_delay / full.mousse.delay.mean_delay;
  Verdict v;
  v.pass = missing.mousse.delay.detected > 0 && full.mousse.delay.detected > 0 && ratio < 3.0;
  v.detail = describe(missing) + fmt("; MOUSSE delay ratio to 0%% missing %.2f (< 3)", ratio);
  return v;
}

// Orthonormal sinusoid pair: every row has squared norm 2 / D, so coherence is 1.
Eigen::MatrixXd sinusoid_basis(Eigen::Index dim, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> frequency(1, static_cast<int>(dim / 2) - 1);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double f = frequency(rng);
  const double ph = phase(rng);
  Eigen::MatrixXd u(dim, 2);
  const double scale = std::sqrt(2.0 / static_cast<double>(dim));
  for (Eigen::Index n = 0; n < dim; ++n) {
    const double angle = 2.0 * std::numbers::pi * f * static_cast<double>(n) / static_cast<double>(dim) + ph;
    u(n, 0) = scale * std::cos(angle);
    u(n, 1) = scale * std::sin(angle);
  }
  return u;
}

Verdict projection_bound() {
  const Eigen::Index dim = 50;
  const double failure_prob = 0.05;
  const double ell = 0.5;
  const int instances = 5000;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> log_uniform(0.0, 1.0);
  int violations = 0;
  int ineligible = 0;
  double worst_ratio = 0.0;
  Eigen::Index smallest = dim;
  for (int i = 0; i < instances; ++i) {
    const Eigen::MatrixXd u = sinusoid_basis(dim, rng);
    const Eigen::VectorXd c = testing::random_gaussian(dim, rng);
    Eigen::VectorXd q = testing::random_gaussian(dim, rng);
    q -= u * (u.transpose() * q);
    q *= std::pow(10.0, -3.0 + 3.0 * log_uniform(rng)) / q.norm();
    const Eigen::VectorXd v = c + u * testing::random_gaussian(2, rng) + q;
    const double noise_var = std::pow(10.0, -6.0 + 4.0 * log_uniform(rng));

    const double min_observed = projection_error_bound(v, c, u, dim, noise_var, failure_prob, ell).min_observed;
    const auto low = static_cast<Eigen::Index>(std::ceil(min_observed));
    if (low > dim) {
      ++ineligible;
      continue;
    }
    const Eigen::Index observed = std::uniform_int_distribution<Eigen::Index>(low, dim)(rng);
    smallest = std::min(smallest, observed);
    const ProjectionErrorBound bound = projection_error_bound(v, c, u, observed, noise_var, failure_prob, ell);

    const Eigen::VectorXd x = v + testing::random_gaussian(dim, rng, std::sqrt(noise_var));
    const auto omega = testing::random_support(dim, observed, rng);
    Eigen::VectorXd values(observed);
    for (Eigen::Index j = 0; j < observed; ++j) values(j) = x(omega[static_cast<std::size_t>(j)]);
    SubsetNode node;
    node.basis = u;
    node.center = c;
    node.lambdas = Eigen::VectorXd::Ones(2);
    node.delta = 1.0;
    const ProjectionResult pr = project_partial(Observation::partial(1, values, omega, dim), node);
    const Eigen::VectorXd beta = u.transpose() * (x - c);
    const double err = (pr.beta - beta).squaredNorm();
    worst_ratio = std::max(worst_ratio, err / bound.bound);
    violations += err > bound.bound ? 1 : 0;
  }
  const int tested = instances - ineligible;
  const double fraction = tested > 0 ? static_cast<double>(violations) / tested : 1.0;
  Verdict v;
  v.pass = tested > 0 && fraction <= 0.17;
  v.detail = fmt("%d of %d instances violate the bound (fraction %.4f <= 0.17); coherence 1, |Omega| >= %ld, worst error/bound %.3g",
                 violations, tested, fraction, static_cast<long>(smallest), worst_ratio);
  if (ineligible > 0) v.notes.push_back(fmt("%d instances could not meet the sample-size condition", ineligible));
  return v;
}

Verdict property_suites() {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  const double beta = testing::complete_beta_error(101, 2000);
  expect(beta < 1e-10, fmt("complete beta %.3g", beta));
  const double maha = testing::dense_mahalanobis_error(103, 2000);
  expect(maha < 1e-8, fmt("dense Mahalanobis %.3g", maha));
  const double ortho = testing::tracker_orthonormality_error(107, 5000);
  expect(ortho < 1e-8, fmt("orthonormality %.3g", ortho));
  const int ordering = testing::fo_gs_ordering_violations(109, 2000);
  expect(ordering == 0, fmt("FO/GS ordering violations %d", ordering));
  double glr = 0.0;
  for (std::size_t w : {1, 20, 200, 1000}) glr = std::max(glr, testing::glr_bruteforce_error(113 + w, 3000, w));
  expect(glr < 1e-12, fmt("GLR brute force %.3g", glr));
  const double standard = testing::glr_standardization_error(127, 3000, 100);
  expect(standard < 1e-12, fmt("standardization %.3g", standard));
  const testing::FuzzReport fuzz = testing::tree_fuzz(100000, 131);
  expect(fuzz.violations == 0 && fuzz.splits > 0 && fuzz.merges > 0,
         fmt("fuzz %zu violations (%s)", fuzz.violations, fuzz.first_violation.c_str()));
  int tested = 0;
  const int inverse = testing::split_merge_inverse_failures(137, &tested);
  expect(inverse == 0 && tested > 0, fmt("split/merge inverse %d of %d", inverse, tested));
  const bool replay = testing::replay_identical(139, 1500);
  expect(replay, "replay differs");

  Verdict v;
  v.pass = failed.empty();
  v.detail = fmt("beta %.2g, Mahalanobis %.2g, orthonormality %.2g, FO/GS ordering violations %d, GLR %.2g, standardization %.2g, "
                 "fuzz %zu steps with %zu violations (%zu splits, %zu merges, up to %zu leaves), split/merge inverse %d/%d failed, replay %s",
                 beta, maha, ortho, ordering, glr, standard, fuzz.steps, fuzz.violations, fuzz.splits, fuzz.merges,
                 fuzz.max_leaves, inverse, tested, replay ? "identical" : "different");
  for (const auto& f : failed) v.notes.push_back("failed: " + f);
  return v;
}

Verdict qq_diagnostic() {
  const Trace tr = track(static_config("sum"));
  const std::vector<double> tail(tr.e.begin() + static_cast<std::ptrdiff_t>(kSteadyFrom), tr.e.end());
  const QqSummary qq = normal_qq(tail);
  Verdict v;
  v.pass = qq.correlation > 0.98;
  v.detail = fmt("QQ correlation of %zu static-manifold residuals e_t (t > 300) = %.4f (> 0.98)", tail.size(), qq.correlation);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the tracker, detector and Monte Carlo harness"};
  bool strict = false;
  std::vector<int> only;
  unsigned threads = 0;
  std::string report_path;
  app.add_flag("--strict", strict, "exit with status 1 if any criterion fails");
  app.add_option("--only", only, "run only these criteria (1-9)")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_option("-j,--threads", threads, "Monte Carlo worker threads (0 = all cores)");
  app.add_option("--report", report_path, "also write the report to this file");
  CLI11_PARSE(app, argc, argv);
  std::ofstream report_file;
  if (!report_path.empty()) report_file.open(report_path);
  auto emit = [&](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (report_file.is_open()) report_file << line << '\n' << std::flush;
  };
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  int passed = 0;
  int run = 0;
  auto report = [&](int id, const char* name, double budget_s, const std::function<Verdict()>& check) {
    if (!wanted(id)) return;
    const auto start = std::chrono::steady_clock::now();
    Verdict v = check();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = budget_s <= 0.0 || seconds < budget_s;
    const bool ok = v.pass && in_time;
    ++run;
    passed += ok ? 1 : 0;
    const std::string budget = budget_s > 0.0 ? fmt(" (budget %.0f s)", budget_s) : "";
    emit(fmt("[%s] criterion %d %s: ", ok ? "PASS" : "FAIL", id, name) + v.detail +
         fmt("; %.2f s", seconds) + budget);
    for (const auto& note : v.notes) emit("       note: " + note);
  };

  report(1, "threshold table", 1.0, threshold_table);
  report(2, "detector-only ARL", 120.0, [&] { return detector_only_arl(threads); });
  report(3, "static tracking", 30.0, static_tracking);
  report(4, "slow-drift adaptivity", 60.0, slow_drift);
  // Criterion 6 compares against the 0%-missing run of criterion 5.
  std::optional<DelayTableRow> full;
  report(5, "delay ordering", 900.0, [&] {
    full = delay_row(0.0, threads);
    return delay_ordering(*full);
  });
  report(6, "missing-data robustness", 900.0, [&] {
    if (!full) full = delay_row(0.0, threads);
    return missing_robustness(*full, delay_row(0.4, threads));
  });
  report(7, "projection error bound", 60.0, projection_bound);
  report(8, "property suites", 300.0, property_suites);
  report(9, "QQ diagnostic", 0.0, qq_diagnostic);

  emit(fmt("%d/%d criteria passed", passed, run));
  return strict && passed != run ? 1 : 0;
}
