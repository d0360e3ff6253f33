#pragma once

#include "wigner/fock.hpp"

#include <cstdint>

namespace wigner {

using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Time-multiplexed detector: B output bins read by binary click detectors,
/// a per-photon bin occupation distribution, and a scalar detection
/// efficiency applied before the splitting network.
struct DetectorModel {
  int bin_count = 0;     // B
  Vector bin_probs;      // size B, sums to 1
  double efficiency = 1; // eta in (0, 1]
  int n_max = 0;         // photon-number truncation of the forward map
};

/// Uniform bins.
DetectorModel make_detector_model(int bin_count, double efficiency, int n_max);
/// Explicit per-bin occupation probabilities.
DetectorModel make_detector_model(Vector bin_probs, double efficiency, int n_max);

/// Click-number distribution over k = 0..B.
struct ClickStatistics {
  Vector probs;
  int max_clicks() const { return static_cast<int>(probs.size()) - 1; }
};

/// Raw click-number counts over k = 0..B.
struct ClickCounts {
  CountVector counts;
  std::int64_t total() const { return counts.sum(); }
  ClickStatistics normalized() const;
};

/// Binomial loss matrix L(eta), (n_max+1) x (n_max+1):
/// L(m, n) = C(n, m) eta^m (1-eta)^(n-m) for m <= n.  Column stochastic.
Matrix loss_matrix(double eta, int n_max);

/// Convolution matrix C, (B+1) x (n_max+1): C(k, n) is the probability that
/// n photons, each landing in bin i with probability bin_probs[i], occupy
/// exactly k distinct bins.  Dynamic programming over bins; state is
/// (photons remaining, bins occupied so far).  Column stochastic.
Matrix convolution_matrix(const DetectorModel& model);

/// Closed form for uniform bins, C(k, n) = S(n, k) k! C(B, k) / B^n with
/// S the Stirling partition numbers.  Kept as an independent route against
/// the dynamic-programming builder.
Matrix convolution_matrix_uniform(int bin_count, int n_max);

/// p_click = C L(eta) rho.
ClickStatistics forward(const DetectorModel& model, const PhotonStatistics& rho);

} // namespace wigner
