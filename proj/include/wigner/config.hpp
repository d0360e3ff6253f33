#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wigner {

/// Everything a run needs, loaded from a flat key-value config file
/// ("section.key = value" lines) plus command-line overrides.
/// Defaults describe the reference experiment.
struct ExperimentConfig {
  // detector
  int bins = 8;
  std::vector<double> bin_probs; // empty = uniform
  double eta = 0.165;
  int n_max = 4;

  // source
  std::vector<double> rho = {0.002, 0.942, 0.054, 0.002};
  double herald_efficiency = 1.0;

  // sweep
  std::vector<double> alphas = {0.0, 0.5, 1.0, 1.5, 2.0};
  double overlap = 0.70;

  // run
  std::int64_t pulses = 1'000'000;
  std::int64_t reference_pulses = 0;   // 0 = same as pulses
  std::int64_t calibration_pulses = 0; // 0 = same as pulses
  int mc_trials = 1000;
  std::uint64_t seed = 1;
  std::string tag_format = "text"; // or "binary"

  // gating
  std::int64_t repetition_period_ps = 500'000;
  std::int64_t gate_width_ps = 4'000;

  // sim
  double dark_rate_hz = 0.0;

  // analysis
  bool weighted_overlap_fit = false;
  bool measured_bin_probs = true; // calibrate C from the data's bin populations
};

/// Loads a config file (empty path = defaults only) and applies
/// "section.key=value" overrides in order.  Throws ConfigError with
/// file:line diagnostics on unknown keys or malformed values.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

/// Flat view of every key, in file order; used to echo the configuration
/// into manifests and reports.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);

} // namespace wigner
