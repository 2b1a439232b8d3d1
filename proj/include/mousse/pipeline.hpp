#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mousse/changepoint.hpp"
#include "mousse/mousse_tree.hpp"
#include "mousse/run_config.hpp"

namespace mousse {

struct StreamRecord {
  std::size_t t = 0;
  double e = 0.0;
  double eps = 0.0;
  std::size_t k = 0;
  double glr = 0.0;
  bool alarm = false;
  bool skipped = false;
};

inline constexpr const char* kRecordHeader = "t,e,eps,k,glr,alarm,skipped";
std::string format_record(const StreamRecord& r);

struct PipelineSummary {
  std::size_t steps = 0;
  std::size_t skipped = 0;
  std::size_t final_k = 0;
  double mean_e = 0.0;    // over tracked steps after the burn-in
  double mean_eps = 0.0;  // over tracked steps after the burn-in
  std::vector<std::size_t> alarms;
  std::optional<Baseline> baseline;
  double threshold = 0.0;
  std::size_t window = 0;
  std::size_t warmup = 0;
  std::size_t n_burn = 0;
  std::string variant;
};

std::string summary_json(const PipelineSummary& s);

/// Tracker plus detector. The first `warmup` steps only track; the next n_burn
/// tracked residuals calibrate the detector baseline and the GLR runs from the
/// step after that.
class Pipeline {
 public:
  Pipeline(MousseTree tree, const DetectorConfig& detector);

  StreamRecord step(const Observation& obs);

  const MousseTree& tree() const { return tree_; }
  const GlrDetector& detector() const { return detector_; }
  PipelineSummary summary() const;
  // Residuals of non-skipped steps after the warmup, in order.
  const std::vector<double>& residuals() const { return residuals_; }

 private:
  MousseTree tree_;
  GlrDetector detector_;
  std::size_t warmup_;
  std::size_t n_burn_;
  std::string variant_;
  std::vector<double> residuals_;
  std::vector<std::size_t> alarms_;
  std::size_t steps_ = 0;
  std::size_t skipped_ = 0;
  double sum_e_ = 0.0;
  double sum_eps_ = 0.0;
  std::size_t post_burn_ = 0;
};

// Builds the initial tree from n_init complete training samples.
MousseTree initial_tree(const std::vector<Eigen::VectorXd>& batch, const RunConfig& cfg);

struct QqSummary {
  std::vector<double> sample;      // sorted residuals
  std::vector<double> theoretical; // standard normal quantiles at (i - 0.5) / n
  double correlation = 0.0;
};

// Normal QQ data for a residual sample.
QqSummary normal_qq(std::vector<double> residuals);

}  // namespace mousse
