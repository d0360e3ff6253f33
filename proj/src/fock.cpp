#include "wigner/fock.hpp"

#include "wigner/errors.hpp"

#include <cmath>
#include <sstream>

namespace wigner {

PhotonStatistics make_statistics(Vector probs, double norm_tol) {
  if (probs.size() == 0) throw NumericalError("photon statistics must have at least one entry");
  for (Eigen::Index n = 0; n < probs.size(); ++n) {
    if (!std::isfinite(probs(n))) throw NumericalError("photon statistics entry is not finite");
    if (probs(n) < 0.0) {
      std::ostringstream msg;
      msg << "photon statistics entry " << n << " is negative (" << probs(n) << ")";
      throw NumericalError(msg.str());
    }
  }
  const double norm = probs.sum();
  if (std::abs(norm - 1.0) > norm_tol) {
    std::ostringstream msg;
    msg << "photon statistics sum to " << norm << ", off from 1 by more than " << norm_tol;
    throw NumericalError(msg.str());
  }
  return PhotonStatistics{std::move(probs)};
}

PhotonStatistics fock_state(int n, int n_max) {
  if (n < 0 || n_max < n) throw NumericalError("fock_state: need 0 <= n <= n_max");
  Vector probs = Vector::Zero(n_max + 1);
  probs(n) = 1.0;
  return PhotonStatistics{std::move(probs)};
}

double displaced_fock_prob(int n, int m, double alpha_mag) {
  if (n < 0 || m < 0) throw NumericalError("displaced_fock_prob: negative photon number");
  if (!std::isfinite(alpha_mag)) throw NumericalError("displaced_fock_prob: alpha is not finite");

  const double x = alpha_mag * alpha_mag;
  if (x == 0.0) return (n == m) ? 1.0 : 0.0;

  const int lo = std::min(n, m);
  const int hi = std::max(n, m);
  const int d = hi - lo;

  const double log_pref = std::lgamma(lo + 1.0) - std::lgamma(hi + 1.0) + d * std::log(x) - x;
  const double lag = generalized_laguerre(lo, d, x);
  return std::exp(log_pref) * lag * lag;
}

TruncatedDistribution displaced_statistics(const PhotonStatistics& rho, double alpha_mag,
                                           int out_n_max, double leakage_threshold) {
  if (out_n_max < rho.n_max()) {
    throw NumericalError("displaced_statistics: output truncation below input n_max");
  }
  Vector out = Vector::Zero(out_n_max + 1);
  for (int m = 0; m <= rho.n_max(); ++m) {
    const double w = rho.probs(m);
    if (w == 0.0) continue;
    for (int n = 0; n <= out_n_max; ++n) {
      out(n) += w * displaced_fock_prob(n, m, alpha_mag);
    }
  }
  const double leakage = 1.0 - out.sum();
  if (leakage > leakage_threshold) {
    std::ostringstream msg;
    msg << "displaced_statistics: truncation leakage " << leakage << " exceeds threshold "
        << leakage_threshold << " (raise out_n_max)";
    throw NumericalError(msg.str());
  }
  return TruncatedDistribution{PhotonStatistics{std::move(out)}, leakage};
}

ParityValue parity(const Vector& rho) {
  for (Eigen::Index n = 0; n < rho.size(); ++n) {
    if (!std::isfinite(rho(n))) throw NumericalError("parity: non-finite entry");
  }
  return ParityValue{alternating_sum(rho), std::nullopt};
}

ParityValue parity(const PhotonStatistics& rho) { return parity(rho.probs); }

WignerPoint wigner_point(const Vector& rho_raw, double alpha_mag) {
  return WignerPoint{alpha_mag, two_over_pi * parity(rho_raw).value, std::nullopt};
}

WignerPoint wigner_point(const PhotonStatistics& rho, double alpha_mag) {
  return wigner_point(rho.probs, alpha_mag);
}

} // namespace wigner
