#pragma once

#include "wigner/calibration.hpp"
#include "wigner/config.hpp"
#include "wigner/displacement.hpp"
#include "wigner/inversion.hpp"
#include "wigner/tags.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wigner {

/// Contents of manifest.json: the files of one simulated (or recorded) run,
/// with paths relative to the run directory, plus a reloadable echo of the
/// configuration that produced them.
struct RunManifest {
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
  struct Point {
    double alpha = 0.0;
    std::string signal_file;    // displaced signal, heralded
    std::string reference_file; // signal blocked, displacement beam only
  };
  std::vector<Point> points;
  std::string pairs_file; // pair source for the efficiency calibration
};

/// Generates one tag file per sweep point, a reference-only file per point,
/// and a pair-source calibration file; writes manifest.json and returns it.
RunManifest simulate_run(const ExperimentConfig& config, const std::filesystem::path& out_dir);

RunManifest read_manifest(const std::filesystem::path& run_dir);

/// Rebuilds the configuration captured in a manifest.
ExperimentConfig manifest_config(const RunManifest& manifest);

/// One analyzed sweep point.  When the Monte Carlo fails its kept-trial
/// quorum (the truncated detector model cannot describe the displaced state,
/// which happens once |alpha|^2 outgrows n_max), `error` carries the
/// diagnostic and only the point-estimate fields of `inversion` are set;
/// the error bars and `wigner.uncertainty` are absent.
struct PointResult {
  double alpha = 0.0;              // nominal sweep value
  ValueWithError alpha_calibrated; // from the matching reference run
  InversionResult inversion;
  WignerPoint wigner;
  std::int64_t heralds = 0;
  std::int64_t coincidences = 0;
  std::int64_t pulses = 0;
  std::string error;

  bool has_error_bars() const { return error.empty(); }
};

struct AnalysisResult {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  int trials = 0;
  CalibrationReport calibration;
  std::optional<OverlapFit> overlap; // needs an alpha = 0 point and >= 2 points
  DetectorModel model;               // detector model used for the inversions
  std::vector<PointResult> points;
};

/// Full pass over a run directory: Klyshko efficiency from the pair file,
/// bin probabilities from the pooled bin populations, per-point inversion
/// with Monte Carlo error bars, displacement calibration, Wigner values and
/// the mode-overlap fit.  Writes statistics.csv, wigner.csv, per-point
/// histogram CSVs and report.json into out_dir.
AnalysisResult analyze_run(const std::filesystem::path& run_dir,
                           const std::filesystem::path& out_dir,
                           std::optional<int> trials_override = {},
                           std::optional<std::uint64_t> seed_override = {});

/// Calibration-only pass; writes calibration.json into out_dir.
CalibrationReport calibrate_run(const std::filesystem::path& run_dir,
                                const std::filesystem::path& out_dir);

/// Writes C.csv, L.csv and CL.csv for the configured detector and returns
/// the condition number of C·L (also recorded as a comment in CL.csv).
double matrices_run(const ExperimentConfig& config, const std::filesystem::path& out_dir);

} // namespace wigner
