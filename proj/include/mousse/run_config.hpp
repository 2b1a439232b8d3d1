#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "mousse/changepoint.hpp"
#include "mousse/datagen.hpp"
#include "mousse/mousse_tree.hpp"

namespace mousse {

struct DetectorConfig {
  std::optional<double> threshold;  // explicit b; otherwise solved from target_arl
  double target_arl = 1000.0;
  std::size_t window = 200;
  std::size_t warmup = 0;  // tracked steps discarded before the burn-in
  std::size_t n_burn = 20;
  AlarmPolicy policy = AlarmPolicy::ResetAndContinue;
  std::optional<NuVariant> variant;  // unset: the self-test winner

  NuVariant resolved_variant() const;
  double resolved_threshold() const;
};

enum class TrackingMode { Mousse, SingleSubspace };

/// Everything one CLI invocation needs. Parsed from flat key=value text with
/// dotted sections, e.g. `mousse.alpha=0.95`.
struct RunConfig {
  ManifoldSpec manifold;
  MousseConfig mousse;
  DetectorConfig detector;
  TrackingMode mode = TrackingMode::Mousse;
  std::size_t horizon = 2000;
  std::size_t n_init = 200;
  std::uint64_t seed = 1;
  double input_scale = 1.0;  // multiplies every value read from a stream file

  // Tree settings actually used: single-subspace mode disables split/merge.
  MousseConfig effective_mousse() const;
  void validate() const;  // throws ConfigError
};

// Applies one key=value setting; throws ConfigError on an unknown key or a
// malformed value.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

// Lines of key=value; '#' starts a comment; blank lines ignored.
RunConfig parse_config(std::string_view text);
RunConfig load_config_file(const std::string& path);

// Canonical key=value rendering; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const RunConfig& cfg);

// The same stream with the abrupt change removed (null hypothesis for ARL runs).
ManifoldSpec without_change(const ManifoldSpec& spec);

}  // namespace mousse
