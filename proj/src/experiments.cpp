#include "mousse/experiments.hpp"

#include <cmath>
#include <memory>

#include <json.hpp>

#include "mousse/errors.hpp"
#include "mousse/pipeline.hpp"

namespace mousse {

using nlohmann::json;

namespace {

struct TrackingTrial {
  StreamGenerator generator;
  MousseTree tree;
};

json ci_json(double lo, double hi) {
  json j = json::array();
  j.push_back(std::isfinite(lo) ? json(lo) : json(nullptr));
  j.push_back(std::isfinite(hi) ? json(hi) : json(nullptr));
  return j;
}

json arl_json(const ArlEstimate& a) {
  return {{"arl_mc", a.arl},
          {"ci95", ci_json(a.ci_low, a.ci_high)},
          {"alarm_fraction", a.p_hat},
          {"all_censored", a.all_censored},
          {"exact_mean", a.exact_mean},
          {"wide_ci", a.n_trials < 100}};
}

json delay_json(const MethodDelay& m) {
  const DelayEstimate& d = m.delay;
  return {{"b", m.threshold},
          {"mean_delay", d.detected > 0 ? json(d.mean_delay) : json(nullptr)},
          {"ci95_half_width", std::isfinite(d.ci_half_width) ? json(d.ci_half_width) : json(nullptr)},
          {"detected", d.detected},
          {"false_alarms", d.false_alarms},
          {"missed", d.missed},
          {"wide_ci", d.detected < 100}};
}

}  // namespace

TrialFactory tracking_trials(const RunConfig& cfg, TrackingMode mode) {
  cfg.validate();
  RunConfig base = cfg;
  base.mode = mode;
  return [base](std::uint64_t seed, std::size_t) {
    ManifoldSpec spec = base.manifold;
    spec.seed = seed;
    RunConfig run = base;
    run.seed = seed;
    auto state = std::make_shared<TrackingTrial>(TrackingTrial{StreamGenerator(spec), MousseTree{}});
    state->tree = initial_tree(state->generator.training_batch(base.n_init), run);

    for (std::size_t i = 0; i < base.detector.warmup; ++i) state->tree.step(state->generator.next().obs);
    // Baseline from the next n_burn tracked residuals.
    std::vector<double> burn;
    while (burn.size() < base.detector.n_burn) {
      const StepResult r = state->tree.step(state->generator.next().obs);
      if (!r.skipped) burn.push_back(r.e);
    }
    TrialStream stream;
    stream.baseline = calibrate(burn, base.detector.n_burn);
    stream.start_time = state->generator.time() + 1;
    // Skipped steps repeat the previous residual so that stream time and
    // detector time stay aligned.
    stream.next = [state] { return state->tree.step(state->generator.next().obs).e; };
    return stream;
  };
}

ArlTableRow arl_table_row(const RunConfig& cfg, std::size_t n_trials, std::size_t horizon, bool detector_only,
                          unsigned threads) {
  ArlTableRow row;
  row.arl_target = cfg.detector.target_arl;
  row.variant = nu_variant_name(cfg.detector.resolved_variant());
  row.theory_threshold = threshold_for_arl(cfg.detector.target_arl, cfg.detector.resolved_variant());
  row.missing_frac = cfg.manifold.missing_frac;
  row.n_trials = n_trials;
  row.horizon = horizon;
  row.window = cfg.detector.window;
  row.detector_only = detector_only;

  if (detector_only) {
    row.gaussian = mc_arl(gaussian_trials(), cfg.detector.window, row.theory_threshold, horizon, n_trials, cfg.seed,
                          threads);
    return row;
  }
  RunConfig null_cfg = cfg;
  null_cfg.manifold = without_change(cfg.manifold);
  for (const TrackingMode mode : {TrackingMode::Mousse, TrackingMode::SingleSubspace}) {
    const TrialFactory factory = tracking_trials(null_cfg, mode);
    MethodArl& out = mode == TrackingMode::Mousse ? row.mousse : row.single;
    out.mc_threshold =
        mc_threshold(factory, cfg.detector.window, cfg.detector.target_arl, horizon, n_trials, cfg.seed, threads)
            .threshold;
    out.at_theory = mc_arl(factory, cfg.detector.window, row.theory_threshold, horizon, n_trials, cfg.seed, threads);
  }
  return row;
}

std::string to_json(const ArlTableRow& row) {
  json j;
  j["b"] = row.theory_threshold;
  j["arl_target"] = row.arl_target;
  j["variant"] = row.variant;
  j["missing_frac"] = row.missing_frac;
  j["n_trials"] = row.n_trials;
  j["horizon"] = row.horizon;
  j["window"] = row.window;
  if (row.detector_only) {
    j["method"] = "gaussian";
    j.update(arl_json(row.gaussian));
  } else {
    json m = arl_json(row.mousse.at_theory);
    m["b_mc"] = row.mousse.mc_threshold;
    json s = arl_json(row.single.at_theory);
    s["b_mc"] = row.single.mc_threshold;
    j["mousse"] = std::move(m);
    j["single_subspace"] = std::move(s);
  }
  return j.dump(2);
}

DelayTableRow delay_table_row(const RunConfig& cfg, std::size_t n_trials, std::size_t calibration_trials,
                              std::size_t calibration_horizon, std::size_t delay_horizon, unsigned threads) {
  const auto change = cfg.manifold.change_time();
  const auto* bump = std::get_if<BumpManifold>(&cfg.manifold.manifold);
  if (!change || bump == nullptr) throw ConfigError("delay experiments need manifold.schedule=jump");

  DelayTableRow row;
  row.arl_target = cfg.detector.target_arl;
  row.jump = std::get<JumpGamma>(bump->gamma).jump;
  row.change_time = *change;
  row.missing_frac = cfg.manifold.missing_frac;
  row.n_trials = n_trials;
  row.calibration_trials = calibration_trials;
  row.calibration_horizon = calibration_horizon;

  RunConfig null_cfg = cfg;
  null_cfg.manifold = without_change(cfg.manifold);
  for (const TrackingMode mode : {TrackingMode::Mousse, TrackingMode::SingleSubspace}) {
    MethodDelay& out = mode == TrackingMode::Mousse ? row.mousse : row.single;
    out.threshold = cfg.detector.threshold
                        ? *cfg.detector.threshold
                        : mc_threshold(tracking_trials(null_cfg, mode), cfg.detector.window, cfg.detector.target_arl,
                                       calibration_horizon, calibration_trials, cfg.seed, threads)
                              .threshold;
    // Change streams use seeds disjoint from the calibration streams.
    out.delay = mc_delay(tracking_trials(cfg, mode), cfg.detector.window, out.threshold, *change, delay_horizon,
                         n_trials, ~cfg.seed, threads);
  }
  return row;
}

std::string to_json(const DelayTableRow& row) {
  json j;
  j["arl_target"] = row.arl_target;
  j["jump"] = row.jump;
  j["change_time"] = row.change_time;
  j["missing_frac"] = row.missing_frac;
  j["n_trials"] = row.n_trials;
  j["calibration_trials"] = row.calibration_trials;
  j["calibration_horizon"] = row.calibration_horizon;
  j["mousse"] = delay_json(row.mousse);
  j["single_subspace"] = delay_json(row.single);
  return j.dump(2);
}

}  // namespace mousse
