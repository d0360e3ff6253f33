#pragma once

#include "wigner/detector.hpp"

#include <cstdint>
#include <vector>

namespace wigner {

struct ValueWithError {
  double value = 0.0;
  double error = 0.0;
};

/// Klyshko absolute efficiency: eta = coincidences / idler singles, with the
/// binomial standard error sqrt(eta (1 - eta) / singles).
ValueWithError klyshko_efficiency(std::int64_t coincidences, std::int64_t idler_singles);

/// Displacement magnitude from a reference-only run (signal blocked):
/// |alpha| = sqrt(<n>_ref / eta), where <n>_ref is the mean photon number of
/// the detected (loss-uncorrected) distribution.  The clicks are unfolded
/// through the convolution matrix only, so the single eta of the model enters
/// exactly once, in the division.  Uncertainty from Monte Carlo resampling of
/// the counts.
ValueWithError displacement_magnitude(const ClickCounts& reference_clicks,
                                      const DetectorModel& model, int mc_trials = 200,
                                      std::uint64_t seed = 0x5eedULL);

/// Relative-frequency estimate of the per-photon bin occupation
/// probabilities; sums to one exactly.
Vector estimate_bin_probs(const std::vector<std::int64_t>& bin_occupation_counts);

/// Bundle of everything needed to run an inversion on real data.
struct CalibrationReport {
  ValueWithError eta;
  std::vector<std::pair<double, ValueWithError>> alphas; // nominal -> calibrated
  Vector bin_probs;
  std::int64_t coincidences = 0;
  std::int64_t idler_singles = 0;
};

} // namespace wigner
