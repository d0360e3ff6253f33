#include "wigner/calibration.hpp"

#include "wigner/errors.hpp"
#include "wigner/inversion.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace wigner {

ValueWithError klyshko_efficiency(std::int64_t coincidences, std::int64_t idler_singles) {
  if (idler_singles <= 0) throw DataError("klyshko_efficiency: no idler events");
  if (coincidences < 0) throw DataError("klyshko_efficiency: negative coincidence count");
  if (coincidences > idler_singles) {
    std::ostringstream msg;
    msg << "klyshko_efficiency: coincidences (" << coincidences << ") exceed idler singles ("
        << idler_singles << ")";
    throw DataError(msg.str());
  }
  const double eta = static_cast<double>(coincidences) / static_cast<double>(idler_singles);
  const double err = std::sqrt(eta * (1.0 - eta) / static_cast<double>(idler_singles));
  return ValueWithError{eta, err};
}

ValueWithError displacement_magnitude(const ClickCounts& reference_clicks,
                                      const DetectorModel& model, int mc_trials,
                                      std::uint64_t seed) {
  if (reference_clicks.total() <= 0) {
    throw DataError("displacement_magnitude: reference run has no events");
  }
  // Unfold the bin convolution but not the loss: the detected mean divided
  // by eta is the incident |alpha|^2.
  DetectorModel convolution_only = model;
  convolution_only.efficiency = 1.0;

  const auto mc = monte_carlo_errors(convolution_only, reference_clicks, mc_trials, seed);

  const auto alpha_of = [&](const Vector& rho) {
    double mean = 0.0;
    for (Eigen::Index n = 0; n < rho.size(); ++n) mean += static_cast<double>(n) * rho(n);
    return std::sqrt(std::max(0.0, mean) / model.efficiency);
  };

  const double alpha = alpha_of(mc.rho_raw);
  double acc = 0.0, acc2 = 0.0;
  for (int j = 0; j < mc.mc_trials_kept; ++j) {
    const double a = alpha_of(mc.kept_trials.col(j));
    acc += a;
    acc2 += a * a;
  }
  const double n = std::max(1, mc.mc_trials_kept);
  const double var = std::max(0.0, acc2 / n - (acc / n) * (acc / n));
  return ValueWithError{alpha, std::sqrt(var)};
}

Vector estimate_bin_probs(const std::vector<std::int64_t>& bin_occupation_counts) {
  if (bin_occupation_counts.empty()) throw DataError("estimate_bin_probs: no bins");
  std::int64_t total = 0;
  for (const auto c : bin_occupation_counts) {
    if (c < 0) throw DataError("estimate_bin_probs: negative count");
    total += c;
  }
  if (total == 0) throw DataError("estimate_bin_probs: all bin counts are zero");
  Vector probs(static_cast<Eigen::Index>(bin_occupation_counts.size()));
  for (std::size_t i = 0; i < bin_occupation_counts.size(); ++i) {
    probs(static_cast<Eigen::Index>(i)) =
        static_cast<double>(bin_occupation_counts[i]) / static_cast<double>(total);
  }
  // force an exact unit sum; relative-frequency rounding leaves ~1e-16
  probs /= probs.sum();
  return probs;
}

} // namespace wigner
