#include "wigner/displacement.hpp"

#include "wigner/errors.hpp"

#include <cmath>
#include <sstream>

namespace wigner {

void validate(const DisplacementSetting& setting) {
  if (!std::isfinite(setting.alpha_mag) || setting.alpha_mag < 0.0) {
    throw NumericalError("displacement setting: alpha magnitude must be finite and >= 0");
  }
  if (!(setting.overlap >= 0.0) || setting.overlap > 1.0) {
    throw NumericalError("displacement setting: overlap must lie in [0, 1]");
  }
}

TruncatedDistribution poisson_vector(double mean, int n_max) {
  if (!(mean >= 0.0)) throw NumericalError("poisson_vector: mean must be >= 0");
  if (n_max < 0) throw NumericalError("poisson_vector: n_max must be >= 0");
  Vector probs = Vector::Zero(n_max + 1);
  if (mean == 0.0) {
    probs(0) = 1.0;
    return TruncatedDistribution{PhotonStatistics{std::move(probs)}, 0.0};
  }
  const double log_mean = std::log(mean);
  for (int n = 0; n <= n_max; ++n) {
    probs(n) = std::exp(-mean + n * log_mean - std::lgamma(n + 1.0));
  }
  const double leakage = 1.0 - probs.sum();
  return TruncatedDistribution{PhotonStatistics{std::move(probs)}, leakage};
}

int default_mismatch_truncation(int n_max, const DisplacementSetting& setting) {
  const double mismatch_mean = (1.0 - setting.overlap) * setting.alpha_mag * setting.alpha_mag;
  return n_max + static_cast<int>(std::ceil(mismatch_mean)) + 10;
}

TruncatedDistribution displaced_with_mismatch(const PhotonStatistics& rho,
                                              const DisplacementSetting& setting, int out_n_max,
                                              double leakage_threshold) {
  validate(setting);
  if (out_n_max < 0) out_n_max = default_mismatch_truncation(rho.n_max(), setting);
  if (out_n_max < rho.n_max()) {
    throw NumericalError("displaced_with_mismatch: output truncation below input n_max");
  }

  const double x = setting.alpha_mag * setting.alpha_mag;
  const double matched_alpha = std::sqrt(setting.overlap) * setting.alpha_mag;
  const double mismatch_mean = (1.0 - setting.overlap) * x;

  // Each factor is computed to the full output order with a permissive
  // threshold; only the composite leakage is checked against the caller's.
  const TruncatedDistribution displaced = displaced_statistics(rho, matched_alpha, out_n_max, 1.0);
  const TruncatedDistribution background = poisson_vector(mismatch_mean, out_n_max);

  Vector out = Vector::Zero(out_n_max + 1);
  for (int j = 0; j <= out_n_max; ++j) {
    const double pj = background.stats.probs(j);
    if (pj == 0.0) continue;
    for (int n = j; n <= out_n_max; ++n) {
      out(n) += pj * displaced.stats.probs(n - j);
    }
  }
  const double leakage = 1.0 - out.sum();
  if (leakage > leakage_threshold) {
    std::ostringstream msg;
    msg << "displaced_with_mismatch: truncation leakage " << leakage << " exceeds threshold "
        << leakage_threshold << " (raise out_n_max)";
    throw NumericalError(msg.str());
  }
  return TruncatedDistribution{PhotonStatistics{std::move(out)}, leakage};
}

namespace {

double overlap_objective(double m, const std::vector<DisplacedObservation>& measured,
                         const PhotonStatistics& rho_signal, bool weighted) {
  double rss = 0.0;
  for (const auto& obs : measured) {
    const DisplacementSetting setting{obs.alpha_mag, m};
    const auto model = displaced_with_mismatch(rho_signal, setting, -1, 1.0);
    const double r0 = model.stats.probs(0) - obs.stats.probs(0);
    const double r1 = model.stats.probs.size() > 1 && obs.stats.probs.size() > 1
                          ? model.stats.probs(1) - obs.stats.probs(1)
                          : 0.0;
    double w0 = 1.0, w1 = 1.0;
    if (weighted) {
      if (obs.sigma_rho0 > 0.0) w0 = 1.0 / (obs.sigma_rho0 * obs.sigma_rho0);
      if (obs.sigma_rho1 > 0.0) w1 = 1.0 / (obs.sigma_rho1 * obs.sigma_rho1);
    }
    rss += w0 * r0 * r0 + w1 * r1 * r1;
  }
  return rss;
}

} // namespace

OverlapFit fit_overlap(const std::vector<DisplacedObservation>& measured,
                       const PhotonStatistics& rho_signal, bool weighted) {
  if (measured.size() < 2) {
    throw DataError("fit_overlap: need at least two displacement settings");
  }
  bool any_displaced = false;
  for (const auto& obs : measured) {
    if (obs.alpha_mag > 0.0) any_displaced = true;
  }
  if (!any_displaced) {
    throw DataError("fit_overlap: degenerate data, all settings have alpha = 0");
  }

  const auto objective = [&](double m) {
    return overlap_objective(m, measured, rho_signal, weighted);
  };

  // Coarse grid over [0, 1], then golden-section refinement in the
  // bracketing interval.
  const int grid = 50;
  double best_m = 0.0;
  double best_f = objective(0.0);
  for (int i = 1; i <= grid; ++i) {
    const double m = static_cast<double>(i) / grid;
    const double f = objective(m);
    if (f < best_f) {
      best_f = f;
      best_m = m;
    }
  }
  double a = std::max(0.0, best_m - 1.0 / grid);
  double b = std::min(1.0, best_m + 1.0 / grid);
  const double inv_phi = 0.6180339887498949;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > 1e-7) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  const double m_hat = 0.5 * (a + b);
  const double f_hat = objective(m_hat);

  // Curvature-based uncertainty: delta-M over which the objective rises by
  // twice the per-residual variance.
  const double h = 1e-3;
  const double lo = std::max(0.0, m_hat - h);
  const double hi = std::min(1.0, m_hat + h);
  const double second =
      (objective(hi) - 2.0 * f_hat + objective(lo)) / ((hi - m_hat) * (m_hat - lo));
  const int n_res = static_cast<int>(2 * measured.size());
  const double s2 = f_hat / std::max(1, n_res - 1);
  double sigma = 0.0;
  if (second > 0.0) sigma = std::sqrt(2.0 * s2 / second);

  const bool clamped = m_hat < 1e-6 || m_hat > 1.0 - 1e-6;
  return OverlapFit{m_hat, sigma, f_hat, clamped};
}

} // namespace wigner
