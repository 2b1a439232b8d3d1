#include "mousse/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "mousse/errors.hpp"

namespace mousse {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                    std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "a non-negative integer");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

BumpManifold& bump(RunConfig& cfg, std::string_view key) {
  auto* b = std::get_if<BumpManifold>(&cfg.manifold.manifold);
  if (b == nullptr) throw ConfigError(std::string(key) + " applies to the bump manifold only");
  return *b;
}

ChirpManifold& chirp(RunConfig& cfg, std::string_view key) {
  auto* c = std::get_if<ChirpManifold>(&cfg.manifold.manifold);
  if (c == nullptr) throw ConfigError(std::string(key) + " applies to the chirp manifold only");
  return *c;
}

// Common drift parameters shared by the slow and jump schedules.
struct DriftParams {
  double start = 0.6;
  double gamma0 = 2e-4;
};

DriftParams drift_of(const GammaSchedule& g) {
  if (const auto* s = std::get_if<SlowGamma>(&g)) return {s->start, s->gamma0};
  if (const auto* j = std::get_if<JumpGamma>(&g)) return {j->start, j->gamma0};
  return {};
}

void set_tracker_alpha(TrackerKind& kind, double alpha) {
  if (auto* p = std::get_if<PetrelsGs>(&kind)) p->alpha = alpha;
  if (auto* p = std::get_if<PetrelsFo>(&kind)) p->alpha = alpha;
}

double tracker_alpha(const TrackerKind& kind, double fallback) {
  if (const auto* p = std::get_if<PetrelsGs>(&kind)) return p->alpha;
  if (const auto* p = std::get_if<PetrelsFo>(&kind)) return p->alpha;
  return fallback;
}

}  // namespace

NuVariant DetectorConfig::resolved_variant() const { return variant.value_or(default_nu_variant()); }

double DetectorConfig::resolved_threshold() const {
  return threshold.has_value() ? *threshold : threshold_for_arl(target_arl, resolved_variant());
}

MousseConfig RunConfig::effective_mousse() const {
  MousseConfig out = mousse;
  if (mode == TrackingMode::SingleSubspace) out.fixed_structure = true;
  return out;
}

void RunConfig::validate() const {
  manifold.validate();
  effective_mousse().validate(manifold.ambient_dim());
  if (detector.window == 0) throw ConfigError("detector.window must be positive");
  if (detector.n_burn < 2) throw ConfigError("detector.n_burn must be >= 2");
  if (detector.threshold && !(*detector.threshold > 0.0)) throw ConfigError("detector.threshold must be positive");
  if (!detector.threshold && !(detector.target_arl > 1.0)) throw ConfigError("detector.target_arl must exceed 1");
  if (n_init < 4 * static_cast<std::size_t>(mousse.intrinsic_dim + 1))
    throw ConfigError("n_init must be at least 4(d+1)");
  if (!(input_scale > 0.0)) throw ConfigError("input.scale must be positive");
  // gamma_at throws ConfigError if the width schedule turns non-positive.
  if (const auto* b = std::get_if<BumpManifold>(&manifold.manifold)) {
    for (std::size_t t = 1; t <= horizon; ++t) gamma_at(b->gamma, t);
  }
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "seed") {
    cfg.seed = to_uint(key, value);
    cfg.manifold.seed = cfg.seed;
  } else if (key == "horizon") {
    cfg.horizon = to_uint(key, value);
  } else if (key == "n_init") {
    cfg.n_init = to_uint(key, value);
  } else if (key == "mode") {
    if (value == "mousse") cfg.mode = TrackingMode::Mousse;
    else if (value == "single") cfg.mode = TrackingMode::SingleSubspace;
    else bad_value(key, value, "mousse or single");
  } else if (key == "input.scale") {
    cfg.input_scale = to_double(key, value);
  } else if (key == "manifold.kind") {
    const Eigen::Index dim = cfg.manifold.ambient_dim();
    if (value == "bump") cfg.manifold.manifold = BumpManifold{dim, StaticGamma{}};
    else if (value == "chirp") cfg.manifold.manifold = ChirpManifold{dim, ChirpSchedule{}};
    else bad_value(key, value, "bump or chirp");
  } else if (key == "manifold.dim") {
    const auto dim = static_cast<Eigen::Index>(to_uint(key, value));
    std::visit([dim](auto& m) { m.ambient_dim = dim; }, cfg.manifold.manifold);
  } else if (key == "manifold.noise_var") {
    cfg.manifold.noise_var = to_double(key, value);
  } else if (key == "manifold.missing_frac") {
    cfg.manifold.missing_frac = to_double(key, value);
  } else if (key == "manifold.schedule") {
    auto& b = bump(cfg, key);
    const DriftParams p = drift_of(b.gamma);
    if (value == "static") b.gamma = StaticGamma{};
    else if (value == "slow") b.gamma = SlowGamma{p.gamma0, 1000, p.start};
    else if (value == "jump") b.gamma = JumpGamma{p.gamma0, 0.05, 200, p.start};
    else bad_value(key, value, "static, slow or jump");
  } else if (key == "manifold.gamma") {
    auto& b = bump(cfg, key);
    const double v = to_double(key, value);
    if (auto* s = std::get_if<StaticGamma>(&b.gamma)) s->gamma = v;
    else if (auto* s = std::get_if<SlowGamma>(&b.gamma)) s->start = v;
    else std::get<JumpGamma>(b.gamma).start = v;
  } else if (key == "manifold.gamma0") {
    auto& b = bump(cfg, key);
    const double v = to_double(key, value);
    if (auto* s = std::get_if<SlowGamma>(&b.gamma)) s->gamma0 = v;
    else if (auto* j = std::get_if<JumpGamma>(&b.gamma)) j->gamma0 = v;
    else throw ConfigError("manifold.gamma0 needs manifold.schedule=slow or jump");
  } else if (key == "manifold.period") {
    auto* s = std::get_if<SlowGamma>(&bump(cfg, key).gamma);
    if (s == nullptr) throw ConfigError("manifold.period needs manifold.schedule=slow");
    s->period = to_uint(key, value);
  } else if (key == "manifold.jump" || key == "manifold.change_time") {
    auto* j = std::get_if<JumpGamma>(&bump(cfg, key).gamma);
    if (j == nullptr) throw ConfigError(std::string(key) + " needs manifold.schedule=jump");
    if (key == "manifold.jump") j->jump = to_double(key, value);
    else j->change_time = to_uint(key, value);
  } else if (key == "manifold.chirp_rate") {
    chirp(cfg, key).schedule.rate = to_double(key, value);
  } else if (key == "manifold.chirp_period") {
    chirp(cfg, key).schedule.period = to_uint(key, value);
  } else if (key == "mousse.d") {
    cfg.mousse.intrinsic_dim = static_cast<int>(to_uint(key, value));
  } else if (key == "mousse.tolerance") {
    cfg.mousse.tolerance = to_double(key, value);
  } else if (key == "mousse.alpha") {
    const double old = cfg.mousse.alpha;
    cfg.mousse.alpha = to_double(key, value);
    // The tracker follows the model's forgetting factor unless set separately.
    if (tracker_alpha(cfg.mousse.tracker, old) == old) set_tracker_alpha(cfg.mousse.tracker, cfg.mousse.alpha);
  } else if (key == "mousse.mu") {
    cfg.mousse.complexity_weight = to_double(key, value);
  } else if (key == "mousse.tracker") {
    const double alpha = tracker_alpha(cfg.mousse.tracker, cfg.mousse.alpha);
    if (value == "grouse") cfg.mousse.tracker = Grouse{};
    else if (value == "petrels-gs") cfg.mousse.tracker = PetrelsGs{alpha};
    else if (value == "petrels-fo") cfg.mousse.tracker = PetrelsFo{alpha};
    else bad_value(key, value, "grouse, petrels-gs or petrels-fo");
  } else if (key == "mousse.tracker_alpha") {
    if (std::holds_alternative<Grouse>(cfg.mousse.tracker))
      throw ConfigError("mousse.tracker_alpha applies to PETRELS only");
    set_tracker_alpha(cfg.mousse.tracker, to_double(key, value));
  } else if (key == "mousse.eta0") {
    auto* g = std::get_if<Grouse>(&cfg.mousse.tracker);
    if (g == nullptr) throw ConfigError("mousse.eta0 needs mousse.tracker=grouse");
    g->eta0 = to_double(key, value);
  } else if (key == "mousse.max_depth") {
    cfg.mousse.max_depth = static_cast<int>(to_uint(key, value));
  } else if (key == "mousse.update_policy") {
    if (value == "nearest") cfg.mousse.update_policy = UpdatePolicy::Nearest;
    else if (value == "all") cfg.mousse.update_policy = UpdatePolicy::All;
    else bad_value(key, value, "nearest or all");
  } else if (key == "mousse.residual_average") {
    if (value == "average") cfg.mousse.residual_average = ResidualAverage::Average;
    else if (value == "sum") cfg.mousse.residual_average = ResidualAverage::Sum;
    else bad_value(key, value, "average or sum");
  } else if (key == "mousse.petrels_gain") {
    cfg.mousse.petrels_initial_gain = to_double(key, value);
  } else if (key == "detector.threshold") {
    cfg.detector.threshold = to_double(key, value);
  } else if (key == "detector.target_arl") {
    cfg.detector.target_arl = to_double(key, value);
    cfg.detector.threshold.reset();
  } else if (key == "detector.window") {
    cfg.detector.window = to_uint(key, value);
  } else if (key == "detector.warmup") {
    cfg.detector.warmup = to_uint(key, value);
  } else if (key == "detector.n_burn") {
    cfg.detector.n_burn = to_uint(key, value);
  } else if (key == "detector.policy") {
    if (value == "reset") cfg.detector.policy = AlarmPolicy::ResetAndContinue;
    else if (value == "stop") cfg.detector.policy = AlarmPolicy::Stop;
    else bad_value(key, value, "reset or stop");
  } else if (key == "detector.variant") {
    cfg.detector.variant = nu_variant_from(value);
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    try {
      apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream out;
  auto put = [&out](std::string_view key, const std::string& value) { out << key << '=' << value << '\n'; };

  put("seed", std::to_string(cfg.seed));
  put("horizon", std::to_string(cfg.horizon));
  put("n_init", std::to_string(cfg.n_init));
  put("mode", cfg.mode == TrackingMode::SingleSubspace ? "single" : "mousse");
  put("input.scale", fmt(cfg.input_scale));

  const ManifoldSpec& m = cfg.manifold;
  if (const auto* b = std::get_if<BumpManifold>(&m.manifold)) {
    put("manifold.kind", "bump");
    put("manifold.dim", std::to_string(b->ambient_dim));
    if (const auto* s = std::get_if<StaticGamma>(&b->gamma)) {
      put("manifold.schedule", "static");
      put("manifold.gamma", fmt(s->gamma));
    } else if (const auto* s = std::get_if<SlowGamma>(&b->gamma)) {
      put("manifold.schedule", "slow");
      put("manifold.gamma", fmt(s->start));
      put("manifold.gamma0", fmt(s->gamma0));
      put("manifold.period", std::to_string(s->period));
    } else {
      const auto& j = std::get<JumpGamma>(b->gamma);
      put("manifold.schedule", "jump");
      put("manifold.gamma", fmt(j.start));
      put("manifold.gamma0", fmt(j.gamma0));
      put("manifold.jump", fmt(j.jump));
      put("manifold.change_time", std::to_string(j.change_time));
    }
  } else {
    const auto& c = std::get<ChirpManifold>(m.manifold);
    put("manifold.kind", "chirp");
    put("manifold.dim", std::to_string(c.ambient_dim));
    put("manifold.chirp_rate", fmt(c.schedule.rate));
    put("manifold.chirp_period", std::to_string(c.schedule.period));
  }
  put("manifold.noise_var", fmt(m.noise_var));
  put("manifold.missing_frac", fmt(m.missing_frac));

  const MousseConfig& mc = cfg.mousse;
  put("mousse.d", std::to_string(mc.intrinsic_dim));
  put("mousse.tolerance", fmt(mc.tolerance));
  put("mousse.alpha", fmt(mc.alpha));
  put("mousse.mu", fmt(mc.complexity_weight));
  if (const auto* g = std::get_if<Grouse>(&mc.tracker)) {
    put("mousse.tracker", "grouse");
    put("mousse.eta0", fmt(g->eta0));
  } else {
    put("mousse.tracker", std::holds_alternative<PetrelsGs>(mc.tracker) ? "petrels-gs" : "petrels-fo");
    put("mousse.tracker_alpha", fmt(tracker_alpha(mc.tracker, mc.alpha)));
  }
  put("mousse.max_depth", std::to_string(mc.max_depth));
  put("mousse.update_policy", mc.update_policy == UpdatePolicy::All ? "all" : "nearest");
  put("mousse.residual_average", mc.residual_average == ResidualAverage::Sum ? "sum" : "average");
  put("mousse.petrels_gain", fmt(mc.petrels_initial_gain));

  const DetectorConfig& d = cfg.detector;
  if (d.threshold) put("detector.threshold", fmt(*d.threshold));
  else put("detector.target_arl", fmt(d.target_arl));
  put("detector.window", std::to_string(d.window));
  put("detector.warmup", std::to_string(d.warmup));
  put("detector.n_burn", std::to_string(d.n_burn));
  put("detector.policy", d.policy == AlarmPolicy::Stop ? "stop" : "reset");
  if (d.variant) put("detector.variant", nu_variant_name(*d.variant));
  return out.str();
}

ManifoldSpec without_change(const ManifoldSpec& spec) {
  ManifoldSpec out = spec;
  if (auto* b = std::get_if<BumpManifold>(&out.manifold))
    if (const auto* j = std::get_if<JumpGamma>(&b->gamma))
      b->gamma = SlowGamma{j->gamma0, std::numeric_limits<std::size_t>::max(), j->start};
  return out;
}

}  // namespace mousse
