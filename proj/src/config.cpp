#include "wigner/config.hpp"

#include "wigner/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace wigner {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(const std::string& where, const std::string& message) {
  throw ConfigError(where + ": " + message);
}

double parse_double(const std::string& where, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(x)) fail(where, "bad number '" + value + "'");
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(where, "bad number '" + value + "'");
  }
}

std::int64_t parse_int(const std::string& where, const std::string& value) {
  std::int64_t x = 0;
  const auto r = std::from_chars(value.data(), value.data() + value.size(), x);
  if (r.ec != std::errc{} || r.ptr != value.data() + value.size()) {
    fail(where, "bad integer '" + value + "'");
  }
  return x;
}

bool parse_bool(const std::string& where, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(where, "bad boolean '" + value + "' (use true/false)");
}

std::vector<double> parse_list(const std::string& where, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(where, "empty element in list '" + value + "'");
    out.push_back(parse_double(where, item));
  }
  if (out.empty()) fail(where, "empty list");
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string format_list(const std::vector<double>& xs) {
  std::string out;
  for (const double x : xs) {
    if (!out.empty()) out += ',';
    out += format_double(x);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"detector.bins",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.bins = static_cast<int>(parse_int(w, v));
         if (c.bins < 1 || c.bins > 30) fail(w, "detector.bins must lie in [1, 30]");
       }},
      {"detector.bin_probs",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         if (v == "uniform") {
           c.bin_probs.clear();
           return;
         }
         c.bin_probs = parse_list(w, v);
       }},
      {"detector.eta",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.eta = parse_double(w, v);
         if (!(c.eta > 0.0) || c.eta > 1.0) fail(w, "detector.eta must lie in (0, 1]");
       }},
      {"detector.n_max",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.n_max = static_cast<int>(parse_int(w, v));
         if (c.n_max < 0) fail(w, "detector.n_max must be >= 0");
       }},
      {"source.rho",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.rho = parse_list(w, v);
         double sum = 0.0;
         for (const double p : c.rho) {
           if (p < 0.0) fail(w, "source.rho entries must be >= 0");
           sum += p;
         }
         if (std::abs(sum - 1.0) > 1e-6) fail(w, "source.rho must sum to 1");
       }},
      {"source.herald_efficiency",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.herald_efficiency = parse_double(w, v);
         if (c.herald_efficiency < 0.0 || c.herald_efficiency > 1.0) {
           fail(w, "source.herald_efficiency must lie in [0, 1]");
         }
       }},
      {"sweep.alphas",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.alphas = parse_list(w, v);
         for (const double a : c.alphas) {
           if (a < 0.0) fail(w, "sweep.alphas entries must be >= 0");
         }
       }},
      {"sweep.overlap",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.overlap = parse_double(w, v);
         if (c.overlap < 0.0 || c.overlap > 1.0) fail(w, "sweep.overlap must lie in [0, 1]");
       }},
      {"run.pulses",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.pulses = parse_int(w, v);
         if (c.pulses < 1) fail(w, "run.pulses must be >= 1");
       }},
      {"run.reference_pulses",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.reference_pulses = parse_int(w, v);
         if (c.reference_pulses < 0) fail(w, "run.reference_pulses must be >= 0");
       }},
      {"run.calibration_pulses",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.calibration_pulses = parse_int(w, v);
         if (c.calibration_pulses < 0) fail(w, "run.calibration_pulses must be >= 0");
       }},
      {"run.mc_trials",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.mc_trials = static_cast<int>(parse_int(w, v));
         if (c.mc_trials < 1) fail(w, "run.mc_trials must be >= 1");
       }},
      {"run.seed",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(parse_int(w, v));
       }},
      {"run.tag_format",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         if (v != "text" && v != "binary") fail(w, "run.tag_format must be text or binary");
         c.tag_format = v;
       }},
      {"gating.repetition_period_ps",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.repetition_period_ps = parse_int(w, v);
         if (c.repetition_period_ps < 1) fail(w, "gating.repetition_period_ps must be >= 1");
       }},
      {"gating.gate_width_ps",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.gate_width_ps = parse_int(w, v);
         if (c.gate_width_ps < 1) fail(w, "gating.gate_width_ps must be >= 1");
       }},
      {"sim.dark_rate_hz",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.dark_rate_hz = parse_double(w, v);
         if (c.dark_rate_hz < 0.0) fail(w, "sim.dark_rate_hz must be >= 0");
       }},
      {"analysis.weighted_overlap_fit",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.weighted_overlap_fit = parse_bool(w, v);
       }},
      {"analysis.measured_bin_probs",
       [](ExperimentConfig& c, const std::string& w, const std::string& v) {
         c.measured_bin_probs = parse_bool(w, v);
       }},
  };
  return table;
}

void apply(ExperimentConfig& config, const std::string& where, const std::string& key,
           const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) fail(where, "unknown key '" + key + "'");
  it->second(config, where, value);
}

void validate_cross_fields(const ExperimentConfig& config) {
  if (config.alphas.empty()) throw ConfigError("sweep.alphas: sweep must be non-empty");
  if (!config.bin_probs.empty() &&
      static_cast<int>(config.bin_probs.size()) != config.bins) {
    throw ConfigError("detector.bin_probs: length does not match detector.bins");
  }
}

} // namespace

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig config;

  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
      ++line_number;
      const std::string where = path + ":" + std::to_string(line_number);
      std::string text = trim(line);
      const auto hash = text.find('#');
      if (hash != std::string::npos) text = trim(text.substr(0, hash));
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string::npos) fail(where, "expected 'section.key = value'");
      const std::string key = trim(text.substr(0, eq));
      const std::string value = trim(text.substr(eq + 1));
      if (key.empty() || value.empty()) fail(where, "expected 'section.key = value'");
      apply(config, where, key, value);
    }
  }

  for (const auto& override_text : overrides) {
    const std::string where = "--set " + override_text;
    const auto eq = override_text.find('=');
    if (eq == std::string::npos) fail(where, "expected key=value");
    const std::string key = trim(override_text.substr(0, eq));
    const std::string value = trim(override_text.substr(eq + 1));
    if (key.empty() || value.empty()) fail(where, "expected key=value");
    apply(config, where, key, value);
  }

  validate_cross_fields(config);
  return config;
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("detector.bins", std::to_string(c.bins));
  out.emplace_back("detector.bin_probs", c.bin_probs.empty() ? "uniform" : format_list(c.bin_probs));
  out.emplace_back("detector.eta", format_double(c.eta));
  out.emplace_back("detector.n_max", std::to_string(c.n_max));
  out.emplace_back("source.rho", format_list(c.rho));
  out.emplace_back("source.herald_efficiency", format_double(c.herald_efficiency));
  out.emplace_back("sweep.alphas", format_list(c.alphas));
  out.emplace_back("sweep.overlap", format_double(c.overlap));
  out.emplace_back("run.pulses", std::to_string(c.pulses));
  out.emplace_back("run.reference_pulses", std::to_string(c.reference_pulses));
  out.emplace_back("run.calibration_pulses", std::to_string(c.calibration_pulses));
  out.emplace_back("run.mc_trials", std::to_string(c.mc_trials));
  out.emplace_back("run.seed", std::to_string(c.seed));
  out.emplace_back("run.tag_format", c.tag_format);
  out.emplace_back("gating.repetition_period_ps", std::to_string(c.repetition_period_ps));
  out.emplace_back("gating.gate_width_ps", std::to_string(c.gate_width_ps));
  out.emplace_back("sim.dark_rate_hz", format_double(c.dark_rate_hz));
  out.emplace_back("analysis.weighted_overlap_fit", c.weighted_overlap_fit ? "true" : "false");
  out.emplace_back("analysis.measured_bin_probs", c.measured_bin_probs ? "true" : "false");
  return out;
}

} // namespace wigner
