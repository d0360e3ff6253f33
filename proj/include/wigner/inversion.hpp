#pragma once

#include "wigner/detector.hpp"

#include <cstdint>

namespace wigner {

/// Result of inverting click statistics back to photon statistics.
/// rho_raw is the unconstrained least-squares solution and may carry small
/// negative entries; rho_constrained is the nonnegative solve, renormalized.
/// The error fields are filled only by monte_carlo_errors.
struct InversionResult {
  Vector rho_raw;
  PhotonStatistics rho_constrained;
  Vector err_lower; // deviation of the 16th percentile below the mode
  Vector err_upper; // deviation of the 84th percentile above the mode
  Vector mc_mode;   // most probable value per entry over kept trials
  double condition_number = 0.0;
  int mc_trials_kept = 0;
  int mc_trials_total = 0;
  Matrix kept_trials; // one kept raw solution per column
};

/// Nonnegative least squares min |A x - b|, x >= 0 (Lawson-Hanson active set).
Vector nnls(const Matrix& a, const Vector& b);

/// Point-estimate inversion of p = C L rho.  Throws NumericalError when
/// C L is column rank deficient, naming the largest invertible n_max.
InversionResult invert(const DetectorModel& model, const ClickStatistics& clicks);
InversionResult invert(const DetectorModel& model, const ClickCounts& counts);

struct MonteCarloOptions {
  double reject_tolerance = 1e-10;  // raw entries below -tol reject a trial
  double min_keep_fraction = 0.01;  // fewer kept trials than this is an error
};

/// Monte Carlo uncertainty propagation: each trial perturbs every click
/// count by a normal deviate of width sqrt(count) (clamped at zero),
/// renormalizes, and re-inverts; trials whose raw solution has a negative
/// entry are discarded.  Error bars are the 16th/84th percentile deviations
/// from the most probable value of the kept-trial distribution.
/// Deterministic for a fixed seed (per-trial substreams).
InversionResult monte_carlo_errors(const DetectorModel& model, const ClickCounts& counts,
                                   int trials, std::uint64_t seed,
                                   const MonteCarloOptions& options = {});

} // namespace wigner
