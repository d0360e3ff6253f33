#pragma once

#include <Eigen/Dense>

#include <optional>

namespace wigner {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Probability distribution over photon number n = 0..n_max.
/// Entries are nonnegative and sum to one (up to a declared tolerance);
/// raw inversion output that violates this lives in a plain Vector instead.
struct PhotonStatistics {
  Vector probs;

  int n_max() const { return static_cast<int>(probs.size()) - 1; }
  double norm() const { return probs.sum(); }
};

/// Validates nonnegativity and normalization before wrapping.
PhotonStatistics make_statistics(Vector probs, double norm_tol = 1e-9);

/// |n><n| as statistics on 0..n_max.
PhotonStatistics fock_state(int n, int n_max);

/// A truncated distribution together with the probability mass lost
/// beyond its last entry.
struct TruncatedDistribution {
  PhotonStatistics stats;
  double leakage = 0.0;
};

struct ParityValue {
  double value = 0.0;
  std::optional<double> uncertainty;
};

/// One probed point of the phase-averaged Wigner function.
struct WignerPoint {
  double alpha_mag = 0.0;
  double value = 0.0;
  std::optional<double> uncertainty;
};

/// Generalized Laguerre polynomial L_i^(k)(x) by the three-term recurrence
/// in i.  Stable in the regime used here (i, k moderate, x = |alpha|^2 <= 9).
template <class Scalar>
Scalar generalized_laguerre(int i, int k, Scalar x) {
  if (i == 0) return Scalar(1);
  Scalar lm1 = Scalar(1);
  Scalar l = Scalar(1 + k) - x;
  for (int j = 1; j < i; ++j) {
    const Scalar next = ((Scalar(2 * j + 1 + k) - x) * l - Scalar(j + k) * lm1) / Scalar(j + 1);
    lm1 = l;
    l = next;
  }
  return l;
}

/// Sum_n (-1)^n v[n] over any dense Eigen expression.
template <class Derived>
double alternating_sum(const Eigen::DenseBase<Derived>& v) {
  double acc = 0.0;
  double sign = 1.0;
  for (Eigen::Index n = 0; n < v.size(); ++n) {
    acc += sign * static_cast<double>(v(n));
    sign = -sign;
  }
  return acc;
}

/// Transition probability |<n|D(alpha)|m>|^2 between Fock states under a
/// displacement of magnitude alpha_mag.  Closed form via generalized
/// Laguerre polynomials, with the factorial ratio evaluated in log space:
///
///   |<n|D(a)|m>|^2 = (lo!/hi!) x^(hi-lo) e^(-x) [L_lo^(hi-lo)(x)]^2,
///   x = a^2, lo = min(n,m), hi = max(n,m).
///
/// Symmetric in n and m; for fixed m the values over n form a probability
/// distribution.  Only the magnitude of the displacement enters (the probed
/// states are phase averaged).
double displaced_fock_prob(int n, int m, double alpha_mag);

/// Photon statistics of a Fock-diagonal state after displacement:
/// out[n] = sum_m rho[m] * displaced_fock_prob(n, m, alpha_mag), n = 0..out_n_max.
/// Throws NumericalError when the truncation leakage 1 - sum(out) exceeds
/// leakage_threshold.
TruncatedDistribution displaced_statistics(const PhotonStatistics& rho, double alpha_mag,
                                           int out_n_max, double leakage_threshold = 1e-6);

/// <Pi> = sum_n (-1)^n rho_n.  Accepts raw (possibly negative) inverted
/// statistics; entries must be finite.
ParityValue parity(const Vector& rho);
ParityValue parity(const PhotonStatistics& rho);

/// Wigner value at the probe coordinate: (2/pi) * parity of the statistics
/// measured after displacing the state by -alpha.
WignerPoint wigner_point(const PhotonStatistics& rho, double alpha_mag);
WignerPoint wigner_point(const Vector& rho_raw, double alpha_mag);

inline constexpr double two_over_pi = 0.63661977236758134308;

} // namespace wigner
