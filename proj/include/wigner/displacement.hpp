#pragma once

#include "wigner/fock.hpp"

#include <vector>

namespace wigner {

/// Displacement of magnitude alpha_mag realized with mode overlap M between
/// signal and reference.  The matched fraction displaces the state by
/// sqrt(M) alpha; the mismatched fraction contributes an independent
/// Poissonian background of mean (1-M) alpha^2.
struct DisplacementSetting {
  double alpha_mag = 0.0;
  double overlap = 1.0; // M in [0, 1]
};

void validate(const DisplacementSetting& setting);

/// Poisson distribution with the given mean, truncated at n_max.
TruncatedDistribution poisson_vector(double mean, int n_max);

/// Default output truncation for displaced_with_mismatch:
/// n_max + ceil((1-M) alpha^2) + 10 keeps the Poisson-tail leakage below
/// 1e-9 in the experimental regime.
int default_mismatch_truncation(int n_max, const DisplacementSetting& setting);

/// Photon statistics after an imperfect displacement: the convolution of the
/// Poissonian mismatch term with the displaced signal statistics.
/// out_n_max < 0 selects default_mismatch_truncation.
TruncatedDistribution displaced_with_mismatch(const PhotonStatistics& rho,
                                              const DisplacementSetting& setting,
                                              int out_n_max = -1,
                                              double leakage_threshold = 1e-6);

/// One inverted measurement entering the overlap fit.  The sigmas are
/// statistical uncertainties on the vacuum and one-photon components and are
/// used only by the weighted variant.
struct DisplacedObservation {
  double alpha_mag = 0.0;
  PhotonStatistics stats;
  double sigma_rho0 = 0.0;
  double sigma_rho1 = 0.0;
};

struct OverlapFit {
  double overlap = 0.0;
  double uncertainty = 0.0;
  double objective = 0.0; // residual sum of squares at the optimum
  bool clamped = false;   // optimum sits on a boundary of [0, 1]
};

/// Least-squares fit of the mode overlap M against the measured vacuum and
/// one-photon components across displacement settings, with rho_signal the
/// statistics measured at alpha = 0.  One-dimensional bounded search
/// (coarse grid, then golden section); uncertainty from the curvature of
/// the objective at the optimum.
OverlapFit fit_overlap(const std::vector<DisplacedObservation>& measured,
                       const PhotonStatistics& rho_signal, bool weighted = false);

} // namespace wigner
