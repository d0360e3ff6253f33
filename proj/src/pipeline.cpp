#include "wigner/pipeline.hpp"

#include "wigner/errors.hpp"
#include "wigner/rng.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace wigner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "wigner-probe/run-v1";
constexpr const char* kReportFormat = "wigner-probe/report-v1";
constexpr const char* kCalibrationFormat = "wigner-probe/calibration-v1";

// Substream indices carving independent random streams out of the root seed.
constexpr std::uint64_t kStreamSignal = 0x100;
constexpr std::uint64_t kStreamReference = 0x10000;
constexpr std::uint64_t kStreamPairs = 0xCA1;
constexpr std::uint64_t kStreamMonteCarlo = 0x20000;
constexpr std::uint64_t kStreamAlphaFit = 0x30000;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::out | std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Vector configured_bin_probs(const ExperimentConfig& config) {
  if (config.bin_probs.empty()) {
    return Vector::Constant(config.bins, 1.0 / config.bins);
  }
  Vector probs(static_cast<Eigen::Index>(config.bin_probs.size()));
  for (std::size_t i = 0; i < config.bin_probs.size(); ++i) {
    probs(static_cast<Eigen::Index>(i)) = config.bin_probs[i];
  }
  return probs;
}

PhotonStatistics source_statistics(const ExperimentConfig& config) {
  Vector probs(static_cast<Eigen::Index>(config.rho.size()));
  for (std::size_t i = 0; i < config.rho.size(); ++i) {
    probs(static_cast<Eigen::Index>(i)) = config.rho[i];
  }
  probs /= probs.sum();
  return PhotonStatistics{std::move(probs)};
}

void write_tag_file(const fs::path& path, std::span<const TimeTagRecord> records,
                    const GatingConfig& gating, const std::string& format) {
  if (format == "binary") {
    write_tags_binary(path, records);
  } else {
    write_tags_text(path, records, gating);
  }
}

std::string point_file_name(const char* role, std::size_t index, const char* extension = ".tags") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02zu%s", role, index, extension);
  return buf;
}

} // namespace

RunManifest simulate_run(const ExperimentConfig& config, const fs::path& out_dir) {
  if (config.alphas.empty()) throw ConfigError("simulate: sweep is empty");
  fs::create_directories(out_dir);

  const GatingConfig gating =
      GatingConfig::standard(config.bins, config.repetition_period_ps, config.gate_width_ps);
  const DetectorModel detector =
      make_detector_model(configured_bin_probs(config), config.eta, config.n_max);
  const PhotonStatistics rho = source_statistics(config);
  const std::int64_t reference_pulses =
      config.reference_pulses > 0 ? config.reference_pulses : config.pulses;
  const std::int64_t calibration_pulses =
      config.calibration_pulses > 0 ? config.calibration_pulses : config.pulses;

  RunManifest manifest;
  manifest.seed = config.seed;
  manifest.config = config_entries(config);

  for (std::size_t i = 0; i < config.alphas.size(); ++i) {
    const double alpha = config.alphas[i];

    const SourceConfig signal{rho, config.herald_efficiency,
                              DisplacementSetting{alpha, config.overlap}, config.dark_rate_hz};
    const auto signal_tags = generate(signal, detector, gating, config.pulses,
                                      substream_state(config.seed, kStreamSignal + i));
    const std::string signal_name = point_file_name("signal", i);
    write_tag_file(out_dir / signal_name, signal_tags, gating, config.tag_format);

    // Signal blocked: the TMD sees the displacement beam alone, a coherent
    // state of mean |alpha|^2, heralded on every pulse for exact bookkeeping.
    const SourceConfig reference{fock_state(0, 0), 1.0, DisplacementSetting{alpha, 1.0},
                                 config.dark_rate_hz};
    const auto reference_tags = generate(reference, detector, gating, reference_pulses,
                                         substream_state(config.seed, kStreamReference + i));
    const std::string reference_name = point_file_name("reference", i);
    write_tag_file(out_dir / reference_name, reference_tags, gating, config.tag_format);

    manifest.points.push_back(RunManifest::Point{alpha, signal_name, reference_name});
  }

  // Pair source for the Klyshko calibration: exactly one signal photon per
  // herald, no displacement.
  const SourceConfig pairs{fock_state(1, 1), 1.0, DisplacementSetting{0.0, 1.0},
                           config.dark_rate_hz};
  const auto pair_tags = generate(pairs, detector, gating, calibration_pulses,
                                  substream_state(config.seed, kStreamPairs));
  manifest.pairs_file = "pairs.tags";
  write_tag_file(out_dir / manifest.pairs_file, pair_tags, gating, config.tag_format);

  json j;
  j["format"] = kManifestFormat;
  j["seed"] = manifest.seed;
  json config_echo = json::object();
  for (const auto& [key, value] : manifest.config) config_echo[key] = value;
  j["config"] = config_echo;
  j["pairs"] = manifest.pairs_file;
  j["points"] = json::array();
  for (const auto& point : manifest.points) {
    j["points"].push_back(
        {{"alpha", point.alpha}, {"signal", point.signal_file}, {"reference", point.reference_file}});
  }
  write_text_file(out_dir / "manifest.json", j.dump(2) + "\n");
  return manifest;
}

RunManifest read_manifest(const fs::path& run_dir) {
  const fs::path path = run_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DataError("missing manifest: " + path.string());

  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }

  RunManifest manifest;
  try {
    if (j.at("format").get<std::string>() != kManifestFormat) {
      throw DataError("manifest " + path.string() + ": unsupported format field");
    }
    manifest.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [key, value] : j.at("config").items()) {
      manifest.config.emplace_back(key, value.get<std::string>());
    }
    manifest.pairs_file = j.at("pairs").get<std::string>();
    for (const auto& point : j.at("points")) {
      manifest.points.push_back(RunManifest::Point{point.at("alpha").get<double>(),
                                                   point.at("signal").get<std::string>(),
                                                   point.at("reference").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  if (manifest.points.empty()) {
    throw DataError("manifest " + path.string() + ": run has no sweep points");
  }
  return manifest;
}

ExperimentConfig manifest_config(const RunManifest& manifest) {
  std::vector<std::string> overrides;
  overrides.reserve(manifest.config.size());
  for (const auto& [key, value] : manifest.config) overrides.push_back(key + "=" + value);
  return load_config("", overrides);
}

namespace {

struct LoadedRun {
  RunManifest manifest;
  ExperimentConfig config;
  GatingConfig gating;
  HeraldedHistogram pairs;
  std::vector<HeraldedHistogram> signals;
  std::vector<HeraldedHistogram> references;
};

LoadedRun load_run(const fs::path& run_dir) {
  LoadedRun run;
  run.manifest = read_manifest(run_dir);
  run.config = manifest_config(run.manifest);
  run.gating = GatingConfig::standard(run.config.bins, run.config.repetition_period_ps,
                                      run.config.gate_width_ps);
  run.pairs = ingest(read_tags(run_dir / run.manifest.pairs_file), run.gating);
  for (const auto& point : run.manifest.points) {
    run.signals.push_back(ingest(read_tags(run_dir / point.signal_file), run.gating));
    run.references.push_back(ingest(read_tags(run_dir / point.reference_file), run.gating));
  }
  return run;
}

CalibrationReport base_calibration(const LoadedRun& run) {
  CalibrationReport cal;
  cal.coincidences = run.pairs.coincidences;
  cal.idler_singles = run.pairs.total_heralds;
  cal.eta = klyshko_efficiency(cal.coincidences, cal.idler_singles);

  // Pool the per-bin populations of every file; the splitting ratios are a
  // property of the detector, not of the source driving it.
  std::vector<std::int64_t> occupations(static_cast<std::size_t>(run.config.bins), 0);
  const auto add = [&](const HeraldedHistogram& histogram) {
    for (std::size_t b = 0; b < occupations.size(); ++b) {
      occupations[b] += histogram.bin_occupations[b];
    }
  };
  add(run.pairs);
  for (const auto& h : run.signals) add(h);
  for (const auto& h : run.references) add(h);
  cal.bin_probs = estimate_bin_probs(occupations);
  return cal;
}

DetectorModel analysis_model(const ExperimentConfig& config, const CalibrationReport& cal) {
  const Vector bin_probs =
      config.measured_bin_probs ? cal.bin_probs : configured_bin_probs(config);
  return make_detector_model(bin_probs, cal.eta.value, config.n_max);
}

void fill_calibrated_alphas(CalibrationReport& cal, const LoadedRun& run,
                            const DetectorModel& model, std::uint64_t seed) {
  for (std::size_t i = 0; i < run.manifest.points.size(); ++i) {
    const auto magnitude =
        displacement_magnitude(run.references[i].conditioned_counts(), model, 200,
                               substream_state(seed, kStreamAlphaFit + i));
    cal.alphas.emplace_back(run.manifest.points[i].alpha, magnitude);
  }
}

json value_with_error_json(const ValueWithError& v) {
  return json{{"value", v.value}, {"error", v.error}};
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void write_analysis_outputs(const AnalysisResult& result, const LoadedRun& run,
                            const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const std::string seed_note =
      "seed=" + std::to_string(result.seed) + "; trials=" + std::to_string(result.trials);

  std::string statistics;
  statistics += "# inverted photon statistics; " + seed_note + "\n";
  statistics += "alpha,n,rho,err_lo,err_hi\n";
  for (const auto& point : result.points) {
    const auto& inv = point.inversion;
    const bool bars = point.has_error_bars();
    for (Eigen::Index n = 0; n < inv.rho_raw.size(); ++n) {
      statistics += fmt(point.alpha) + "," + std::to_string(n) + "," + fmt(inv.rho_raw(n)) + "," +
                    (bars ? fmt(inv.err_lower(n)) : "nan") + "," +
                    (bars ? fmt(inv.err_upper(n)) : "nan") + "\n";
    }
  }
  write_text_file(out_dir / "statistics.csv", statistics);

  std::string wigner;
  wigner += "# probed Wigner values; " + seed_note + "\n";
  wigner += "alpha,W,err\n";
  for (const auto& point : result.points) {
    wigner += fmt(point.alpha) + "," + fmt(point.wigner.value) + "," +
              (point.wigner.uncertainty ? fmt(*point.wigner.uncertainty) : "nan") + "\n";
  }
  write_text_file(out_dir / "wigner.csv", wigner);

  for (std::size_t i = 0; i < result.points.size(); ++i) {
    write_histogram_csv(out_dir / point_file_name("histogram", i, ".csv"), run.signals[i],
                        "clicks at alpha=" + fmt(result.points[i].alpha) + "; " + seed_note);
  }

  json report;
  report["format"] = kReportFormat;
  report["seed"] = result.seed;
  report["trials"] = result.trials;
  json config_echo = json::object();
  for (const auto& [key, value] : config_entries(result.config)) config_echo[key] = value;
  report["config"] = config_echo;

  report["calibration"] = {
      {"eta", value_with_error_json(result.calibration.eta)},
      {"coincidences", result.calibration.coincidences},
      {"idler_singles", result.calibration.idler_singles},
      {"bin_probs", vector_json(result.calibration.bin_probs)},
  };
  report["model"] = {
      {"bins", result.model.bin_count},
      {"eta", result.model.efficiency},
      {"n_max", result.model.n_max},
      {"bin_probs", vector_json(result.model.bin_probs)},
      {"bin_probs_source", result.config.measured_bin_probs ? "measured" : "configured"},
      {"condition_number", result.points.front().inversion.condition_number},
  };
  if (result.overlap) {
    report["overlap"] = {{"value", result.overlap->overlap},
                        {"error", result.overlap->uncertainty},
                        {"objective", result.overlap->objective},
                        {"clamped", result.overlap->clamped}};
  } else {
    report["overlap"] = nullptr;
  }

  report["points"] = json::array();
  for (const auto& point : result.points) {
    const auto& inv = point.inversion;
    json p;
    p["alpha"] = point.alpha;
    p["alpha_calibrated"] = value_with_error_json(point.alpha_calibrated);
    p["heralds"] = point.heralds;
    p["coincidences"] = point.coincidences;
    p["pulses"] = point.pulses;
    p["wigner"] = {{"value", point.wigner.value},
                   {"error", point.wigner.uncertainty ? json(*point.wigner.uncertainty)
                                                      : json(nullptr)}};
    p["rho_raw"] = vector_json(inv.rho_raw);
    p["rho_constrained"] = vector_json(inv.rho_constrained.probs);
    if (point.has_error_bars()) {
      p["err_lower"] = vector_json(inv.err_lower);
      p["err_upper"] = vector_json(inv.err_upper);
      p["error"] = nullptr;
    } else {
      p["err_lower"] = nullptr;
      p["err_upper"] = nullptr;
      p["error"] = point.error;
    }
    p["mc_trials_kept"] = inv.mc_trials_kept;
    p["mc_trials_total"] = inv.mc_trials_total;
    report["points"].push_back(std::move(p));
  }
  write_text_file(out_dir / "report.json", report.dump(2) + "\n");
}

} // namespace

AnalysisResult analyze_run(const fs::path& run_dir, const fs::path& out_dir,
                           std::optional<int> trials_override,
                           std::optional<std::uint64_t> seed_override) {
  const LoadedRun run = load_run(run_dir);

  AnalysisResult result;
  result.config = run.config;
  result.seed = seed_override.value_or(run.manifest.seed);
  result.trials = trials_override.value_or(run.config.mc_trials);
  if (result.trials < 1) throw ConfigError("analyze: Monte Carlo trials must be >= 1");

  result.calibration = base_calibration(run);
  result.model = analysis_model(run.config, result.calibration);
  fill_calibrated_alphas(result.calibration, run, result.model, result.seed);

  for (std::size_t i = 0; i < run.manifest.points.size(); ++i) {
    const auto& point = run.manifest.points[i];
    PointResult r;
    r.alpha = point.alpha;
    r.alpha_calibrated = result.calibration.alphas[i].second;
    r.heralds = run.signals[i].total_heralds;
    r.coincidences = run.signals[i].coincidences;
    r.pulses = run.signals[i].total_pulses;

    const ClickCounts counts = run.signals[i].conditioned_counts();
    try {
      r.inversion = invert(result.model, counts);
    } catch (const NumericalError& e) {
      throw NumericalError("sweep point alpha = " + fmt(point.alpha) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("sweep point alpha = " + fmt(point.alpha) + ": " + e.what());
    }

    // The Monte Carlo quorum dies once |alpha|^2 outgrows the truncation and
    // the model stops describing the displaced state.  That is a property of
    // the sweep point, not of the run: keep the point estimate, record the
    // diagnostic, and carry on with the remaining points.
    try {
      r.inversion = monte_carlo_errors(result.model, counts, result.trials,
                                       substream_state(result.seed, kStreamMonteCarlo + i));
    } catch (const NumericalError& e) {
      r.error = e.what();
    }

    r.wigner = wigner_point(r.inversion.rho_raw, r.alpha);
    if (r.has_error_bars()) {
      double acc = 0.0, acc2 = 0.0;
      for (int j = 0; j < r.inversion.mc_trials_kept; ++j) {
        const double w = two_over_pi * alternating_sum(r.inversion.kept_trials.col(j));
        acc += w;
        acc2 += w * w;
      }
      const double n = std::max(1, r.inversion.mc_trials_kept);
      r.wigner.uncertainty = std::sqrt(std::max(0.0, acc2 / n - (acc / n) * (acc / n)));
    }

    result.points.push_back(std::move(r));
  }

  // Mode-overlap fit against the vacuum and one-photon components, anchored
  // on the undisplaced point's constrained statistics.  Points without error
  // bars carry no trustworthy rho estimate and are left out.
  std::ptrdiff_t anchor = -1;
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    if (result.points[i].alpha == 0.0 && result.points[i].has_error_bars()) {
      anchor = static_cast<std::ptrdiff_t>(i);
    }
  }
  if (anchor >= 0) {
    std::vector<DisplacedObservation> observations;
    for (const auto& point : result.points) {
      if (!point.has_error_bars()) continue;
      DisplacedObservation obs;
      obs.alpha_mag = point.alpha_calibrated.value;
      obs.stats = PhotonStatistics{point.inversion.rho_raw};
      obs.sigma_rho0 = 0.5 * (point.inversion.err_lower(0) + point.inversion.err_upper(0));
      if (point.inversion.rho_raw.size() > 1) {
        obs.sigma_rho1 = 0.5 * (point.inversion.err_lower(1) + point.inversion.err_upper(1));
      }
      observations.push_back(std::move(obs));
    }
    if (observations.size() >= 2) {
      result.overlap = fit_overlap(observations, result.points[anchor].inversion.rho_constrained,
                                   run.config.weighted_overlap_fit);
    }
  }

  write_analysis_outputs(result, run, out_dir);
  return result;
}

CalibrationReport calibrate_run(const fs::path& run_dir, const fs::path& out_dir) {
  const LoadedRun run = load_run(run_dir);
  CalibrationReport cal = base_calibration(run);
  const DetectorModel model = analysis_model(run.config, cal);
  fill_calibrated_alphas(cal, run, model, run.manifest.seed);

  fs::create_directories(out_dir);
  json j;
  j["format"] = kCalibrationFormat;
  j["seed"] = run.manifest.seed;
  j["eta"] = value_with_error_json(cal.eta);
  j["coincidences"] = cal.coincidences;
  j["idler_singles"] = cal.idler_singles;
  j["bin_probs"] = vector_json(cal.bin_probs);
  j["alphas"] = json::array();
  for (const auto& [nominal, calibrated] : cal.alphas) {
    j["alphas"].push_back(
        {{"nominal", nominal}, {"value", calibrated.value}, {"error", calibrated.error}});
  }
  write_text_file(out_dir / "calibration.json", j.dump(2) + "\n");
  return cal;
}

namespace {

std::string matrix_csv(const Matrix& m, const std::string& comment = {}) {
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      out += fmt17(m(r, c));
    }
    out += '\n';
  }
  return out;
}

} // namespace

double matrices_run(const ExperimentConfig& config, const fs::path& out_dir) {
  const DetectorModel model =
      make_detector_model(configured_bin_probs(config), config.eta, config.n_max);
  const Matrix conv = convolution_matrix(model);
  const Matrix loss = loss_matrix(model.efficiency, model.n_max);
  const Matrix combined = conv * loss;

  Eigen::JacobiSVD<Matrix> svd(combined);
  const auto& sv = svd.singularValues();
  const double condition = sv(0) / sv(sv.size() - 1);

  fs::create_directories(out_dir);
  write_text_file(out_dir / "C.csv", matrix_csv(conv));
  write_text_file(out_dir / "L.csv", matrix_csv(loss));
  write_text_file(out_dir / "CL.csv",
                  matrix_csv(combined, "condition_number=" + fmt17(condition)));
  return condition;
}

} // namespace wigner
