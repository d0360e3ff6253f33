#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "wigner/errors.hpp"
#include "wigner/pipeline.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace wigner;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "wigner-pipeline-test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

ExperimentConfig small_config() {
  return load_config("", {"sweep.alphas=0,0.4", "run.pulses=2000", "run.mc_trials=200"});
}

} // namespace

TEST_CASE("simulate writes the advertised file set") {
  const fs::path dir = fresh_dir("simulate");
  const RunManifest manifest = simulate_run(small_config(), dir);

  CHECK(manifest.seed == 1);
  REQUIRE(manifest.points.size() == 2);
  CHECK(manifest.points[0].alpha == 0.0);
  CHECK(manifest.points[1].alpha == 0.4);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / manifest.pairs_file));
  for (const auto& point : manifest.points) {
    CHECK(fs::exists(dir / point.signal_file));
    CHECK(fs::exists(dir / point.reference_file));
  }
  CHECK(!manifest.config.empty());

  const RunManifest reread = read_manifest(dir);
  CHECK(reread.seed == manifest.seed);
  CHECK(reread.points.size() == manifest.points.size());
  CHECK(reread.pairs_file == manifest.pairs_file);
}

TEST_CASE("simulation is reproducible and seed-sensitive") {
  const fs::path a = fresh_dir("repro-a");
  const fs::path b = fresh_dir("repro-b");
  const fs::path c = fresh_dir("repro-c");
  ExperimentConfig config = small_config();
  simulate_run(config, a);
  simulate_run(config, b);
  config.seed = 2;
  simulate_run(config, c);

  const RunManifest manifest = read_manifest(a);
  CHECK(slurp(a / manifest.points[0].signal_file) == slurp(b / manifest.points[0].signal_file));
  CHECK(slurp(a / manifest.pairs_file) == slurp(b / manifest.pairs_file));
  CHECK(slurp(a / manifest.points[0].signal_file) != slurp(c / manifest.points[0].signal_file));
}

TEST_CASE("manifest validation") {
  CHECK_THROWS_AS(read_manifest(fresh_dir("no-manifest")), DataError);

  const fs::path bad_json = fresh_dir("bad-json");
  std::ofstream(bad_json / "manifest.json") << "{ not json";
  CHECK_THROWS_AS(read_manifest(bad_json), DataError);

  const fs::path bad_format = fresh_dir("bad-format");
  std::ofstream(bad_format / "manifest.json")
      << R"({"format":"something-else","seed":1,"config":{},"pairs":"p","points":[]})";
  CHECK_THROWS_AS(read_manifest(bad_format), DataError);
}

TEST_CASE("analyze recovers the run parameters at desk scale") {
  const fs::path run = fresh_dir("analyze-run");
  const fs::path out = fresh_dir("analyze-out");
  simulate_run(small_config(), run);
  const AnalysisResult result = analyze_run(run, out);

  CHECK(fs::exists(out / "statistics.csv"));
  CHECK(fs::exists(out / "wigner.csv"));
  CHECK(fs::exists(out / "report.json"));
  CHECK(fs::exists(out / "histogram_00.csv"));
  CHECK(fs::exists(out / "histogram_01.csv"));

  REQUIRE(result.points.size() == 2);
  // 2000 heralds: loose statistical gates only; the tight ones live in the
  // acceptance suite at 10^6
  CHECK(std::abs(result.calibration.eta.value - 0.165) < 0.05);
  CHECK(std::abs(result.points[0].wigner.value + 0.565) < 0.3);
  CHECK(result.points[0].has_error_bars());
  CHECK(result.points[1].has_error_bars());
  CHECK(result.points[0].wigner.uncertainty.value() > 0.0);
  CHECK(std::abs(result.points[1].alpha_calibrated.value - 0.4) < 0.15);
  CHECK(result.points[0].heralds == 2000);
  CHECK(result.points[0].pulses == 2000);
  CHECK(result.model.n_max == 4);
  CHECK(result.model.bin_count == 8);
  CHECK(result.overlap.has_value());

  // measured bin probabilities feed the model by default
  CHECK(result.model.bin_probs.size() == 8);
  CHECK(result.model.bin_probs.sum() == doctest::Approx(1.0).epsilon(1e-12));

  const json report = json::parse(slurp(out / "report.json"));
  CHECK(report.at("format") == "wigner-probe/report-v1");
  CHECK(report.at("points").size() == 2);
  CHECK(report.at("points")[0].at("error").is_null());
  CHECK(report.at("config").at("run.pulses") == "2000");
}

TEST_CASE("analysis output is deterministic") {
  const fs::path run = fresh_dir("det-run");
  const fs::path out1 = fresh_dir("det-out1");
  const fs::path out2 = fresh_dir("det-out2");
  simulate_run(small_config(), run);
  analyze_run(run, out1);
  analyze_run(run, out2);
  CHECK(slurp(out1 / "statistics.csv") == slurp(out2 / "statistics.csv"));
  CHECK(slurp(out1 / "wigner.csv") == slurp(out2 / "wigner.csv"));
  CHECK(slurp(out1 / "report.json") == slurp(out2 / "report.json"));
}

TEST_CASE("trials and seed overrides reach the Monte Carlo") {
  const fs::path run = fresh_dir("override-run");
  const fs::path out = fresh_dir("override-out");
  simulate_run(small_config(), run);

  const AnalysisResult fast = analyze_run(run, out, 50);
  CHECK(fast.trials == 50);
  CHECK(fast.points[0].inversion.mc_trials_total == 50);

  const AnalysisResult reseeded = analyze_run(run, out, 50, 99);
  CHECK(reseeded.seed == 99);
  CHECK((reseeded.points[0].inversion.err_upper - fast.points[0].inversion.err_upper)
            .cwiseAbs()
            .maxCoeff() > 0.0);

  CHECK_THROWS_AS(analyze_run(run, out, 0), ConfigError);
  CHECK_THROWS_AS(analyze_run(fresh_dir("missing"), out), DataError);
}

TEST_CASE("a sweep point outside the truncation's reach fails soft") {
  const fs::path run = fresh_dir("outside-run");
  const fs::path out = fresh_dir("outside-out");
  const ExperimentConfig config =
      load_config("", {"sweep.alphas=0,2", "run.pulses=30000", "run.mc_trials=300"});
  simulate_run(config, run);
  const AnalysisResult result = analyze_run(run, out);

  REQUIRE(result.points.size() == 2);
  CHECK(result.points[0].has_error_bars());
  CHECK(!result.points[1].has_error_bars());
  CHECK(result.points[1].error.find("satisfied nonnegativity") != std::string::npos);
  // the point estimate survives for diagnostics
  CHECK(result.points[1].inversion.rho_raw.size() == 5);
  CHECK(!result.points[1].wigner.uncertainty.has_value());
  // a single healthy point cannot support the overlap fit
  CHECK(!result.overlap.has_value());

  const json report = json::parse(slurp(out / "report.json"));
  CHECK(report.at("points")[1].at("error").is_string());
  CHECK(report.at("points")[1].at("err_lower").is_null());
  CHECK(report.at("overlap").is_null());

  // wigner.csv marks the missing bar as nan
  std::istringstream wigner_csv(slurp(out / "wigner.csv"));
  std::string line, last;
  while (std::getline(wigner_csv, line)) {
    if (!line.empty()) last = line;
  }
  CHECK(last.find("nan") != std::string::npos);
}

TEST_CASE("calibrate emits the calibration bundle") {
  const fs::path run = fresh_dir("cal-run");
  const fs::path out = fresh_dir("cal-out");
  simulate_run(small_config(), run);
  const CalibrationReport cal = calibrate_run(run, out);

  CHECK(cal.idler_singles > 0);
  CHECK(cal.coincidences > 0);
  CHECK(std::abs(cal.eta.value - 0.165) < 0.05);
  REQUIRE(cal.alphas.size() == 2);
  CHECK(cal.alphas[0].first == 0.0);
  CHECK(cal.alphas[1].first == 0.4);

  const json j = json::parse(slurp(out / "calibration.json"));
  CHECK(j.at("format") == "wigner-probe/calibration-v1");
  CHECK(j.at("alphas").size() == 2);
}

TEST_CASE("matrices dump the forward model with its conditioning") {
  const fs::path out = fresh_dir("matrices-out");
  const double condition = matrices_run(load_config("", {}), out);
  CHECK(condition > 1.0);

  const std::string cl = slurp(out / "CL.csv");
  CHECK(cl.find("# condition_number=") == 0);
  CHECK(fs::exists(out / "C.csv"));
  CHECK(fs::exists(out / "L.csv"));

  // 9 click rows by 5 photon columns at the defaults
  std::istringstream c_csv(slurp(out / "C.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(c_csv, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 4);
  }
  CHECK(rows == 9);
}

TEST_CASE("binary tag format flows through the pipeline") {
  const fs::path run = fresh_dir("binary-run");
  const fs::path out = fresh_dir("binary-out");
  const ExperimentConfig config = load_config(
      "", {"sweep.alphas=0,0.4", "run.pulses=2000", "run.mc_trials=100", "run.tag_format=binary"});
  simulate_run(config, run);
  const RunManifest manifest = read_manifest(run);
  const std::string head = slurp(run / manifest.points[0].signal_file).substr(0, 9);
  CHECK(head == "WPTAGBIN1");
  const AnalysisResult result = analyze_run(run, out);
  CHECK(result.points.size() == 2);
}
