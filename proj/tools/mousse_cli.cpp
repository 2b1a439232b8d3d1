#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mousse/changepoint.hpp"
#include "mousse/datagen.hpp"
#include "mousse/errors.hpp"
#include "mousse/experiments.hpp"
#include "mousse/pipeline.hpp"
#include "mousse/run_config.hpp"
#include "mousse/stream_io.hpp"

namespace {

using namespace mousse;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> settings;
};

RunConfig resolve_config(const CommonOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config_file(opts.config_path);
  for (const std::string& s : opts.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "key=value configuration file");
  cmd->add_option("-s,--set", opts.settings, "override a setting, e.g. --set mousse.alpha=0.95")->take_all();
}

// Output sink that is either a file or stdout ("-").
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path == "-" || path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw DataError("cannot write " + path);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cmd_simulate(const CommonOptions& common, const std::string& out_path, const std::string& truth_path) {
  const RunConfig cfg = resolve_config(common);
  StreamGenerator gen(cfg.manifold);
  Sink out(out_path);
  std::unique_ptr<Sink> truth = truth_path.empty() ? nullptr : std::make_unique<Sink>(truth_path);

  const Eigen::Index dim = cfg.manifold.ambient_dim();
  write_stream_header(out.stream(), dim);
  for (const auto& x : gen.training_batch(cfg.n_init)) write_complete_row(out.stream(), x);
  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    const Sample s = gen.next();
    write_observation_row(out.stream(), s.obs, dim);
    if (truth) write_truth_line(truth->stream(), s);
  }
  if (!out.stream()) throw DataError("write failed for " + out_path);
  return 0;
}

int cmd_track(const CommonOptions& common, const std::string& input_path, const std::string& out_path,
              const std::string& summary_path, const std::string& checkpoint_in, const std::string& checkpoint_out,
              const std::string& qq_path) {
  const RunConfig cfg = resolve_config(common);
  std::ifstream in(input_path, std::ios::binary);
  if (!in) throw DataError("cannot read " + input_path);
  StreamReader reader(in, cfg.input_scale);

  std::optional<MousseTree> tree;
  std::size_t t = 0;
  std::optional<Observation> pending;
  if (!checkpoint_in.empty()) {
    tree = MousseTree::load_checkpoint(read_file(checkpoint_in));
    if (tree->ambient_dim() != reader.ambient_dim()) throw DataError("checkpoint dimension differs from the stream");
  } else {
    std::vector<Eigen::VectorXd> batch;
    while (batch.size() < cfg.n_init) {
      auto obs = reader.next(0);
      if (!obs) break;
      if (!obs->is_complete(reader.ambient_dim()))
        throw DataError("line " + std::to_string(reader.line()) + ": initialization rows must be complete");
      batch.push_back(obs->values);
    }
    if (!batch.empty() && batch.size() < cfg.n_init)
      throw DataError("stream ends inside the initialization batch (" + std::to_string(batch.size()) + " of " +
                      std::to_string(cfg.n_init) + " rows)");
    if (!batch.empty()) tree = initial_tree(batch, cfg);
  }

  Sink out(out_path);
  out.stream() << kRecordHeader << '\n';
  PipelineSummary summary;
  std::vector<double> residuals;
  if (tree) {
    Pipeline pipeline(std::move(*tree), cfg.detector);
    while (auto obs = reader.next(++t)) {
      try {
        out.stream() << format_record(pipeline.step(*obs)) << '\n';
      } catch (const Error& e) {
        throw DataError("line " + std::to_string(reader.line()) + ": " + e.what());
      }
    }
    summary = pipeline.summary();
    residuals = pipeline.residuals();
    if (!checkpoint_out.empty()) Sink(checkpoint_out).stream() << pipeline.tree().save_checkpoint() << '\n';
  } else {
    summary.window = cfg.detector.window;
    summary.warmup = cfg.detector.warmup;
    summary.n_burn = cfg.detector.n_burn;
    summary.threshold = cfg.detector.resolved_threshold();
    summary.variant = cfg.detector.threshold ? "explicit" : nu_variant_name(cfg.detector.resolved_variant());
  }
  if (!summary_path.empty()) Sink(summary_path).stream() << summary_json(summary) << '\n';
  if (!qq_path.empty() && residuals.size() >= 2) {
    const QqSummary qq = normal_qq(residuals);
    Sink sink(qq_path);
    sink.stream() << "theoretical,sample\n";
    for (std::size_t i = 0; i < qq.sample.size(); ++i)
      sink.stream() << format_double(qq.theoretical[i]) << ',' << format_double(qq.sample[i]) << '\n';
  }
  return 0;
}

int cmd_threshold(double target, const std::string& variant) {
  const NuSelfTest self = nu_self_test();
  nlohmann::json j;
  j["arl_target"] = target;
  j["as-printed"] = threshold_for_arl(target, NuVariant::AsPrinted);
  j["half-arg"] = threshold_for_arl(target, NuVariant::HalfArg);
  j["self_test_winner"] = nu_variant_name(self.selected);
  j["self_test"] = {{"as-printed", self.as_printed_ok}, {"half-arg", self.half_arg_ok}};
  const NuVariant chosen = variant.empty() ? self.selected : nu_variant_from(variant);
  j["variant"] = nu_variant_name(chosen);
  j["b"] = threshold_for_arl(target, chosen);
  j["arl_at_b"] = arl_approx(j["b"].get<double>(), chosen);
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale online manifold tracking and change-point detection"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string out_path = "-";
  std::string truth_path;
  auto* simulate = app.add_subcommand("simulate", "write a synthetic stream file");
  add_common(simulate, common);
  simulate->add_option("-o,--out", out_path, "stream file ('-' for stdout)");
  simulate->add_option("--truth", truth_path, "truth sidecar (JSON lines)");

  std::string input_path;
  std::string summary_path;
  std::string checkpoint_in;
  std::string checkpoint_out;
  std::string qq_path;
  auto* track = app.add_subcommand("track", "track a stream file and run the detector");
  add_common(track, common);
  track->add_option("-i,--input", input_path, "stream file")->required();
  track->add_option("-o,--out", out_path, "per-step CSV ('-' for stdout)");
  track->add_option("--summary", summary_path, "summary JSON");
  track->add_option("--load-checkpoint", checkpoint_in, "start from a saved tree instead of the init rows");
  track->add_option("--save-checkpoint", checkpoint_out, "save the final tree");
  track->add_option("--qq", qq_path, "normal QQ data of the residuals (CSV)");

  double target_arl = 1000.0;
  std::string variant;
  auto* threshold = app.add_subcommand("threshold", "threshold b for a target ARL");
  threshold->add_option("-a,--arl", target_arl, "target ARL")->required();
  threshold->add_option("--variant", variant, "as-printed or half-arg (default: self-test winner)");

  std::size_t trials = 500;
  std::size_t horizon = 1000;
  unsigned threads = 0;
  bool detector_only = false;
  auto* mc_arl_cmd = app.add_subcommand("mc-arl", "Monte Carlo threshold/ARL table row");
  add_common(mc_arl_cmd, common);
  mc_arl_cmd->add_option("-n,--trials", trials, "number of trials");
  mc_arl_cmd->add_option("-m,--horizon", horizon, "steps per trial after burn-in");
  mc_arl_cmd->add_flag("--detector-only", detector_only, "feed i.i.d. N(0,1) residuals instead of tracking");
  mc_arl_cmd->add_option("-j,--threads", threads, "worker threads (0 = all cores)");
  mc_arl_cmd->add_option("-o,--out", out_path, "JSON output ('-' for stdout)");

  std::size_t calibration_trials = 300;
  std::size_t calibration_horizon = 1000;
  std::size_t delay_horizon = 1200;
  auto* mc_delay_cmd = app.add_subcommand("mc-delay", "Monte Carlo detection-delay table row");
  add_common(mc_delay_cmd, common);
  mc_delay_cmd->add_option("-n,--trials", trials, "number of change trials");
  mc_delay_cmd->add_option("--calibration-trials", calibration_trials, "no-change trials for the MC threshold");
  mc_delay_cmd->add_option("--calibration-horizon", calibration_horizon, "steps per calibration trial");
  mc_delay_cmd->add_option("--delay-horizon", delay_horizon, "last stream time of a change trial");
  mc_delay_cmd->add_option("-j,--threads", threads, "worker threads (0 = all cores)");
  mc_delay_cmd->add_option("-o,--out", out_path, "JSON output ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(common, out_path, truth_path);
    if (track->parsed())
      return cmd_track(common, input_path, out_path, summary_path, checkpoint_in, checkpoint_out, qq_path);
    if (threshold->parsed()) return cmd_threshold(target_arl, variant);
    if (mc_arl_cmd->parsed()) {
      const RunConfig cfg = resolve_config(common);
      Sink(out_path).stream() << to_json(arl_table_row(cfg, trials, horizon, detector_only, threads)) << '\n';
      return 0;
    }
    if (mc_delay_cmd->parsed()) {
      const RunConfig cfg = resolve_config(common);
      const DelayTableRow row =
          delay_table_row(cfg, trials, calibration_trials, calibration_horizon, delay_horizon, threads);
      Sink(out_path).stream() << to_json(row) << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NoBracket& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
