#include "wigner/inversion.hpp"

#include "wigner/errors.hpp"
#include "wigner/rng.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace wigner {

Vector nnls(const Matrix& a, const Vector& b) {
  const int n = static_cast<int>(a.cols());
  Vector x = Vector::Zero(n);
  std::vector<bool> passive(n, false);
  int passive_count = 0;

  const double tol = 1e-12 * a.cwiseAbs().maxCoeff() * std::max(a.rows(), a.cols());

  const auto solve_passive = [&](Vector& z) {
    Matrix ap(a.rows(), passive_count);
    std::vector<int> idx;
    idx.reserve(passive_count);
    for (int i = 0; i < n; ++i) {
      if (passive[i]) {
        ap.col(static_cast<int>(idx.size())) = a.col(i);
        idx.push_back(i);
      }
    }
    const Vector zp = ap.colPivHouseholderQr().solve(b);
    z = Vector::Zero(n);
    for (std::size_t i = 0; i < idx.size(); ++i) z(idx[i]) = zp(static_cast<int>(i));
  };

  int outer = 0;
  const int max_outer = 3 * n + 10;
  while (outer++ < max_outer) {
    const Vector w = a.transpose() * (b - a * x);
    int best = -1;
    double best_w = tol;
    for (int i = 0; i < n; ++i) {
      if (!passive[i] && w(i) > best_w) {
        best_w = w(i);
        best = i;
      }
    }
    if (best < 0) break; // KKT satisfied
    passive[best] = true;
    ++passive_count;

    Vector z;
    solve_passive(z);
    int inner = 0;
    while (inner++ < max_outer) {
      double min_z = 0.0;
      for (int i = 0; i < n; ++i) {
        if (passive[i]) min_z = std::min(min_z, z(i));
      }
      if (min_z > 0.0) break;
      // step toward z until the first passive coordinate hits zero
      double alpha = 1.0;
      for (int i = 0; i < n; ++i) {
        if (passive[i] && z(i) <= 0.0) {
          const double denom = x(i) - z(i);
          if (denom > 0.0) alpha = std::min(alpha, x(i) / denom);
        }
      }
      for (int i = 0; i < n; ++i) {
        if (passive[i]) x(i) += alpha * (z(i) - x(i));
      }
      for (int i = 0; i < n; ++i) {
        if (passive[i] && x(i) <= tol) {
          passive[i] = false;
          x(i) = 0.0;
          --passive_count;
        }
      }
      if (passive_count == 0) break;
      solve_passive(z);
    }
    if (passive_count > 0) {
      for (int i = 0; i < n; ++i) x(i) = passive[i] ? std::max(z(i), 0.0) : 0.0;
    }
  }
  return x;
}

namespace {

Matrix system_matrix(const DetectorModel& model) {
  return convolution_matrix(model) * loss_matrix(model.efficiency, model.n_max);
}

// Throws when C L cannot be inverted for this truncation; otherwise returns
// the condition number.
double check_rank(const DetectorModel& model, const Matrix& a) {
  if (model.n_max > model.bin_count) {
    std::ostringstream msg;
    msg << "inversion: n_max = " << model.n_max << " is not invertible with " << model.bin_count
        << " bins; the largest invertible n_max is " << model.bin_count;
    throw NumericalError(msg.str());
  }
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& sv = svd.singularValues();
  const double cond = sv(0) / sv(sv.size() - 1);
  if (!(sv(sv.size() - 1) > sv(0) * 1e-13)) {
    std::ostringstream msg;
    msg << "inversion: C L is rank deficient at n_max = " << model.n_max
        << "; the largest invertible n_max is " << model.bin_count;
    throw NumericalError(msg.str());
  }
  return cond;
}

PhotonStatistics constrained_solution(const Matrix& a, const Vector& p) {
  Vector x = nnls(a, p);
  const double sum = x.sum();
  if (sum <= 0.0) throw NumericalError("inversion: constrained solution has zero mass");
  return PhotonStatistics{x / sum};
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

// Most probable value by a histogram with Freedman-Diaconis bin widths.
double mode_estimate(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
  const double lo = values.front();
  const double hi = values.back();
  const double width = 2.0 * iqr / std::cbrt(static_cast<double>(n));
  if (width <= 0.0 || hi <= lo) return quantile(values, 0.5);
  const int bins = std::max(1, static_cast<int>(std::ceil((hi - lo) / width)));
  std::vector<int> hist(bins, 0);
  for (const double v : values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    ++hist[b];
  }
  const int best = static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
  return lo + (best + 0.5) * (hi - lo) / bins;
}

} // namespace

InversionResult invert(const DetectorModel& model, const ClickStatistics& clicks) {
  if (clicks.probs.size() != model.bin_count + 1) {
    throw NumericalError("inversion: click vector length does not match bin count + 1");
  }
  const Matrix a = system_matrix(model);
  InversionResult result;
  result.condition_number = check_rank(model, a);
  result.rho_raw = a.colPivHouseholderQr().solve(clicks.probs);
  result.rho_constrained = constrained_solution(a, clicks.probs);
  return result;
}

InversionResult invert(const DetectorModel& model, const ClickCounts& counts) {
  return invert(model, counts.normalized());
}

InversionResult monte_carlo_errors(const DetectorModel& model, const ClickCounts& counts,
                                   int trials, std::uint64_t seed,
                                   const MonteCarloOptions& options) {
  if (trials < 1) throw NumericalError("monte_carlo_errors: need at least one trial");
  for (Eigen::Index k = 0; k < counts.counts.size(); ++k) {
    if (counts.counts(k) < 0) throw DataError("monte_carlo_errors: negative click count");
  }

  InversionResult result = invert(model, counts);
  const Matrix a = system_matrix(model);
  const auto qr = a.colPivHouseholderQr();

  const int dim = model.n_max + 1;
  const Vector base = counts.counts.cast<double>();
  const Vector sigma = base.cwiseSqrt();

  std::vector<Vector> kept;
  kept.reserve(trials);
  for (int t = 0; t < trials; ++t) {
    Rng rng(seed, static_cast<std::uint64_t>(t));
    Vector perturbed(base.size());
    for (Eigen::Index k = 0; k < base.size(); ++k) {
      perturbed(k) = std::max(0.0, base(k) + sigma(k) * rng.normal());
    }
    const double total = perturbed.sum();
    if (total <= 0.0) continue;
    const Vector rho = qr.solve(perturbed / total);
    if (rho.minCoeff() < -options.reject_tolerance) continue;
    kept.push_back(rho);
  }

  result.mc_trials_total = trials;
  result.mc_trials_kept = static_cast<int>(kept.size());
  const int min_kept =
      std::max(1, static_cast<int>(std::ceil(trials * options.min_keep_fraction)));
  if (result.mc_trials_kept < min_kept) {
    std::ostringstream msg;
    msg << "monte_carlo_errors: only " << result.mc_trials_kept << " of " << trials
        << " trials satisfied nonnegativity; the detector model is badly conditioned or the "
           "click data are inconsistent with it";
    throw NumericalError(msg.str());
  }

  result.kept_trials.resize(dim, result.mc_trials_kept);
  for (int j = 0; j < result.mc_trials_kept; ++j) result.kept_trials.col(j) = kept[j];

  result.err_lower.resize(dim);
  result.err_upper.resize(dim);
  result.mc_mode.resize(dim);
  std::vector<double> values(kept.size());
  for (int i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < kept.size(); ++j) values[j] = kept[j](i);
    const double mode = mode_estimate(values);
    std::sort(values.begin(), values.end());
    result.mc_mode(i) = mode;
    result.err_lower(i) = std::max(0.0, mode - quantile(values, 0.16));
    result.err_upper(i) = std::max(0.0, quantile(values, 0.84) - mode);
  }
  return result;
}

} // namespace wigner
