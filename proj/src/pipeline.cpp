#include "mousse/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "mousse/errors.hpp"
#include "mousse/stream_io.hpp"

namespace mousse {

std::string format_record(const StreamRecord& r) {
  return std::to_string(r.t) + ',' + format_double(r.e) + ',' + format_double(r.eps) + ',' + std::to_string(r.k) +
         ',' + format_double(r.glr) + ',' + (r.alarm ? '1' : '0') + ',' + (r.skipped ? '1' : '0');
}

std::string summary_json(const PipelineSummary& s) {
  nlohmann::json j;
  j["steps"] = s.steps;
  j["skipped"] = s.skipped;
  j["final_k"] = s.final_k;
  j["mean_e"] = s.mean_e;
  j["mean_eps"] = s.mean_eps;
  j["alarms"] = s.alarms;
  if (s.baseline) {
    j["mu0"] = s.baseline->mu0;
    j["sigma0"] = s.baseline->sigma0;
  } else {
    j["mu0"] = nullptr;
    j["sigma0"] = nullptr;
  }
  j["threshold"] = s.threshold;
  j["window"] = s.window;
  j["warmup"] = s.warmup;
  j["n_burn"] = s.n_burn;
  j["variant"] = s.variant;
  return j.dump(2);
}

Pipeline::Pipeline(MousseTree tree, const DetectorConfig& detector)
    : tree_(std::move(tree)),
      detector_(detector.window, detector.resolved_threshold(), detector.policy),
      warmup_(detector.warmup),
      n_burn_(detector.n_burn),
      variant_(detector.threshold ? "explicit" : nu_variant_name(detector.resolved_variant())) {}

StreamRecord Pipeline::step(const Observation& obs) {
  const StepResult res = tree_.step(obs);
  ++steps_;
  StreamRecord rec;
  rec.t = obs.t;
  rec.e = res.e;
  rec.eps = res.eps;
  rec.k = res.k;
  rec.skipped = res.skipped;
  if (res.skipped) {
    ++skipped_;
    return rec;
  }
  if (steps_ <= warmup_) return rec;
  residuals_.push_back(res.e);
  if (!detector_.calibrated()) {
    if (residuals_.size() == n_burn_) detector_.set_baseline(calibrate(residuals_, n_burn_));
    return rec;
  }
  const GlrUpdate u = detector_.update(res.e);
  rec.glr = u.statistic;
  rec.alarm = u.alarm;
  if (u.alarm) alarms_.push_back(obs.t);
  sum_e_ += res.e;
  sum_eps_ += res.eps;
  ++post_burn_;
  return rec;
}

PipelineSummary Pipeline::summary() const {
  PipelineSummary s;
  s.steps = steps_;
  s.skipped = skipped_;
  s.final_k = tree_.num_leaves();
  if (post_burn_ > 0) {
    s.mean_e = sum_e_ / static_cast<double>(post_burn_);
    s.mean_eps = sum_eps_ / static_cast<double>(post_burn_);
  }
  s.alarms = alarms_;
  s.baseline = detector_.baseline();
  s.threshold = detector_.threshold();
  s.window = detector_.window();
  s.warmup = warmup_;
  s.n_burn = n_burn_;
  s.variant = variant_;
  return s;
}

MousseTree initial_tree(const std::vector<Eigen::VectorXd>& batch, const RunConfig& cfg) {
  MousseConfig mc = cfg.effective_mousse();
  mc.seed = cfg.seed;
  return MousseTree::from_batch(batch, mc);
}

QqSummary normal_qq(std::vector<double> residuals) {
  QqSummary out;
  const std::size_t n = residuals.size();
  if (n < 2) throw InsufficientData("QQ diagnostic needs at least two residuals");
  std::sort(residuals.begin(), residuals.end());
  out.sample = std::move(residuals);
  out.theoretical.resize(n);
  const boost::math::normal_distribution<double> standard;
  for (std::size_t i = 0; i < n; ++i)
    out.theoretical[i] = boost::math::quantile(standard, (static_cast<double>(i) + 0.5) / static_cast<double>(n));

  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += out.theoretical[i];
    my += out.sample[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = out.theoretical[i] - mx;
    const double dy = out.sample[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  out.correlation = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
  return out;
}

}  // namespace mousse
