#include "wigner/detector.hpp"

#include "wigner/errors.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace wigner {

namespace {

void validate_model(const DetectorModel& model) {
  if (model.bin_count < 1) throw NumericalError("detector model: bin count must be >= 1");
  if (model.n_max < 0) throw NumericalError("detector model: n_max must be >= 0");
  if (model.bin_probs.size() != model.bin_count) {
    throw NumericalError("detector model: bin_probs size does not match bin count");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < model.bin_probs.size(); ++i) {
    if (model.bin_probs(i) < 0.0) throw NumericalError("detector model: negative bin probability");
    sum += model.bin_probs(i);
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "detector model: bin probabilities sum to " << sum;
    throw NumericalError(msg.str());
  }
  if (!(model.efficiency > 0.0) || model.efficiency > 1.0) {
    throw NumericalError("detector model: efficiency must lie in (0, 1]");
  }
}

// Binomial coefficients, exact by Pascal's rule up to n = 30, log-space above.
double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  if (n <= 30) {
    static const auto table = [] {
      std::vector<std::vector<double>> t(31);
      for (int i = 0; i <= 30; ++i) {
        t[i].assign(i + 1, 1.0);
        for (int j = 1; j < i; ++j) t[i][j] = t[i - 1][j - 1] + t[i - 1][j];
      }
      return t;
    }();
    return table[n][k];
  }
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

} // namespace

DetectorModel make_detector_model(int bin_count, double efficiency, int n_max) {
  if (bin_count < 1) throw NumericalError("detector model: bin count must be >= 1");
  Vector probs = Vector::Constant(bin_count, 1.0 / bin_count);
  DetectorModel model{bin_count, std::move(probs), efficiency, n_max};
  validate_model(model);
  return model;
}

DetectorModel make_detector_model(Vector bin_probs, double efficiency, int n_max) {
  DetectorModel model{static_cast<int>(bin_probs.size()), std::move(bin_probs), efficiency, n_max};
  validate_model(model);
  return model;
}

ClickStatistics ClickCounts::normalized() const {
  const std::int64_t n = total();
  if (n <= 0) throw DataError("click counts: total number of events is zero");
  return ClickStatistics{counts.cast<double>() / static_cast<double>(n)};
}

Matrix loss_matrix(double eta, int n_max) {
  if (!(eta > 0.0) || eta > 1.0) throw NumericalError("loss_matrix: efficiency must lie in (0, 1]");
  if (n_max < 0) throw NumericalError("loss_matrix: n_max must be >= 0");
  const int dim = n_max + 1;
  Matrix l = Matrix::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) {
    for (int m = 0; m <= n; ++m) {
      l(m, n) = binomial(n, m) * std::pow(eta, m) * std::pow(1.0 - eta, n - m);
    }
  }
  return l;
}

Matrix convolution_matrix(const DetectorModel& model) {
  validate_model(model);
  const int bins = model.bin_count;
  const int n_max = model.n_max;
  Matrix c = Matrix::Zero(bins + 1, n_max + 1);

  // Tail sums q_i + q_{i+1} + ... for the sequential-binomial factorization
  // of the multinomial assignment.
  std::vector<double> tail(bins + 1, 0.0);
  for (int i = bins - 1; i >= 0; --i) tail[i] = tail[i + 1] + model.bin_probs(i);

  for (int n = 0; n <= n_max; ++n) {
    // state(r, k) = probability that r photons remain with k bins occupied
    Matrix state = Matrix::Zero(n + 1, bins + 1);
    state(n, 0) = 1.0;
    for (int i = 0; i < bins; ++i) {
      Matrix next = Matrix::Zero(n + 1, bins + 1);
      const double q = tail[i] > 0.0 ? model.bin_probs(i) / tail[i] : 0.0;
      for (int r = 0; r <= n; ++r) {
        for (int k = 0; k <= std::min(i, bins); ++k) {
          const double p = state(r, k);
          if (p == 0.0) continue;
          for (int t = 0; t <= r; ++t) {
            const double w = binomial(r, t) * std::pow(q, t) * std::pow(1.0 - q, r - t);
            if (w == 0.0) continue;
            next(r - t, t > 0 ? k + 1 : k) += p * w;
          }
        }
      }
      state.swap(next);
    }
    for (int k = 0; k <= bins; ++k) c(k, n) = state(0, k);
  }
  return c;
}

Matrix convolution_matrix_uniform(int bin_count, int n_max) {
  if (bin_count < 1) throw NumericalError("convolution_matrix_uniform: bin count must be >= 1");
  if (n_max < 0) throw NumericalError("convolution_matrix_uniform: n_max must be >= 0");

  // Stirling partition numbers S(n, k)
  Matrix stirling = Matrix::Zero(n_max + 1, n_max + 1);
  stirling(0, 0) = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    for (int k = 1; k <= n; ++k) {
      stirling(n, k) = k * stirling(n - 1, k) + stirling(n - 1, k - 1);
    }
  }

  Matrix c = Matrix::Zero(bin_count + 1, n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    const double norm = std::pow(static_cast<double>(bin_count), n);
    double k_fact = 1.0;
    for (int k = 0; k <= std::min(n, bin_count); ++k) {
      if (k > 0) k_fact *= k;
      c(k, n) = stirling(n, k) * k_fact * binomial(bin_count, k) / norm;
    }
  }
  return c;
}

ClickStatistics forward(const DetectorModel& model, const PhotonStatistics& rho) {
  validate_model(model);
  if (rho.n_max() != model.n_max) {
    std::ostringstream msg;
    msg << "forward: statistics truncation " << rho.n_max() << " does not match detector n_max "
        << model.n_max;
    throw NumericalError(msg.str());
  }
  const Matrix c = convolution_matrix(model);
  const Matrix l = loss_matrix(model.efficiency, model.n_max);
  return ClickStatistics{c * (l * rho.probs)};
}

} // namespace wigner
