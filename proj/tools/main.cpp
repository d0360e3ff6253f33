#include "wigner/config.hpp"
#include "wigner/errors.hpp"
#include "wigner/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-by-point Wigner probing with a time-multiplexed click detector:\n"
               "simulate time-tag acquisitions, calibrate, invert click statistics and\n"
               "emit figure data."};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = ".";
  std::string in_dir;
  std::uint64_t seed_value = 0;
  int trials_value = 0;
  std::string format = "csv";

  const auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Key-value config file (defaults when omitted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "Override a config entry, e.g. --set detector.eta=0.2")
        ->take_all();
  };
  const auto add_format_flag = [&](CLI::App* cmd) {
    cmd->add_option("--format", format, "Tabular output format")
        ->check(CLI::IsMember({"csv"}));
  };

  auto* simulate = app.add_subcommand("simulate", "Generate time-tag files for a full sweep");
  add_config_flags(simulate);
  simulate->add_option("--out-dir", out_dir, "Run directory to create")->required();
  auto* simulate_seed = simulate->add_option("--seed", seed_value, "Override run.seed");

  auto* analyze = app.add_subcommand("analyze", "Ingest a run directory and emit figure data");
  analyze->add_option("--in-dir", in_dir, "Run directory containing manifest.json")->required();
  analyze->add_option("--out-dir", out_dir, "Directory for CSV and report output")->required();
  auto* analyze_trials = analyze->add_option("--trials", trials_value, "Monte Carlo trials")
                             ->check(CLI::PositiveNumber);
  auto* analyze_seed = analyze->add_option("--seed", seed_value, "Monte Carlo seed");
  add_format_flag(analyze);

  auto* matrices = app.add_subcommand("matrices", "Dump C, L and C·L with the condition number");
  add_config_flags(matrices);
  matrices->add_option("--out-dir", out_dir, "Directory for the matrix CSV files")->required();
  add_format_flag(matrices);

  auto* calibrate = app.add_subcommand("calibrate", "Klyshko + displacement calibration only");
  calibrate->add_option("--in-dir", in_dir, "Run directory containing manifest.json")->required();
  calibrate->add_option("--out-dir", out_dir, "Directory for calibration.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(simulate)) {
      wigner::ExperimentConfig config = wigner::load_config(config_path, sets);
      if (simulate_seed->count() > 0) config.seed = seed_value;
      const auto manifest = wigner::simulate_run(config, out_dir);
      std::cout << "wrote " << (2 * manifest.points.size() + 1) << " tag files + manifest.json to "
                << out_dir << " (seed " << manifest.seed << ")\n";
    } else if (app.got_subcommand(analyze)) {
      std::optional<int> trials;
      if (analyze_trials->count() > 0) trials = trials_value;
      std::optional<std::uint64_t> seed;
      if (analyze_seed->count() > 0) seed = seed_value;
      const auto result = wigner::analyze_run(in_dir, out_dir, trials, seed);

      std::cout << "eta = " << fmt(result.calibration.eta.value) << " +- "
                << fmt(result.calibration.eta.error) << " (" << result.calibration.coincidences
                << "/" << result.calibration.idler_singles << " coincidences/heralds)\n";
      if (result.overlap) {
        std::cout << "overlap M = " << fmt(result.overlap->overlap) << " +- "
                  << fmt(result.overlap->uncertainty)
                  << (result.overlap->clamped ? " (clamped)" : "") << "\n";
      }
      for (const auto& point : result.points) {
        std::cout << "alpha " << fmt(point.alpha) << " (calibrated "
                  << fmt(point.alpha_calibrated.value) << "): W = " << fmt(point.wigner.value);
        if (point.wigner.uncertainty) {
          std::cout << " +- " << fmt(*point.wigner.uncertainty) << "\n";
        } else {
          std::cout << " (no error bars: " << point.error << ")\n";
        }
      }
      std::cout << "wrote statistics.csv, wigner.csv, report.json to " << out_dir << "\n";
    } else if (app.got_subcommand(matrices)) {
      const wigner::ExperimentConfig config = wigner::load_config(config_path, sets);
      const double condition = wigner::matrices_run(config, out_dir);
      std::cout << "condition_number = " << fmt(condition) << "\n";
      std::cout << "wrote C.csv, L.csv, CL.csv to " << out_dir << "\n";
    } else if (app.got_subcommand(calibrate)) {
      const auto cal = wigner::calibrate_run(in_dir, out_dir);
      std::cout << "eta = " << fmt(cal.eta.value) << " +- " << fmt(cal.eta.error) << "\n";
      for (const auto& [nominal, calibrated] : cal.alphas) {
        std::cout << "alpha " << fmt(nominal) << " -> " << fmt(calibrated.value) << " +- "
                  << fmt(calibrated.error) << "\n";
      }
      std::cout << "wrote calibration.json to " << out_dir << "\n";
    }
  } catch (const wigner::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const wigner::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const wigner::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
