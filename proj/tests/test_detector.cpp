#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "wigner/detector.hpp"
#include "wigner/errors.hpp"

#include "oracles.hpp"

using namespace wigner;

TEST_CASE("loss matrix matches the Pascal-triangle oracle") {
  for (double eta : {0.165, 0.5, 0.93}) {
    const Matrix l = loss_matrix(eta, 6);
    for (int n = 0; n <= 6; ++n) {
      for (int m = 0; m <= 6; ++m) {
        CHECK(l(m, n) == doctest::Approx(oracle::binomial_loss_prob(m, n, eta)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("lossless limit is the identity") {
  CHECK((loss_matrix(1.0, 5) - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loss composes multiplicatively") {
  const Matrix a = loss_matrix(0.6, 8) * loss_matrix(0.275, 8);
  const Matrix b = loss_matrix(0.6 * 0.275, 8);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("loss matrix rejects bad efficiency") {
  CHECK_THROWS_AS(loss_matrix(0.0, 4), NumericalError);
  CHECK_THROWS_AS(loss_matrix(1.2, 4), NumericalError);
  CHECK_THROWS_AS(loss_matrix(0.5, -1), NumericalError);
}

TEST_CASE("convolution matrix: dynamic programming vs Stirling closed form") {
  for (int bins : {2, 4, 8}) {
    const Matrix dp = convolution_matrix(make_detector_model(bins, 1.0, 10));
    const Matrix st = convolution_matrix_uniform(bins, 10);
    CHECK((dp - st).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("convolution matrix matches brute-force enumeration, nonuniform bins") {
  Vector q(3);
  q << 0.5, 0.3, 0.2;
  const DetectorModel model = make_detector_model(q, 1.0, 5);
  const Matrix c = convolution_matrix(model);
  for (int n = 0; n <= 5; ++n) {
    const Vector ref = oracle::click_distribution_enumerated(q, n);
    for (int k = 0; k <= 3; ++k) {
      CHECK(c(k, n) == doctest::Approx(ref(k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("eight uniform bins, three photons: exact click rationals") {
  // 8^3 routings: 8 collisions onto one bin, 3*8*7 pairs, 8*7*6 all distinct.
  const Matrix c = convolution_matrix_uniform(8, 3);
  CHECK(c(1, 3) == doctest::Approx(1.0 / 64.0).epsilon(1e-15));
  CHECK(c(2, 3) == doctest::Approx(21.0 / 64.0).epsilon(1e-15));
  CHECK(c(3, 3) == doctest::Approx(42.0 / 64.0).epsilon(1e-15));
  CHECK(c(0, 0) == 1.0);
  CHECK(c(0, 3) == 0.0);
}

TEST_CASE("columns of C and L are probability distributions") {
  for (int bins : {2, 4, 8}) {
    for (double eta : {0.165, 0.5, 1.0}) {
      const DetectorModel model = make_detector_model(bins, eta, 10);
      const Matrix c = convolution_matrix(model);
      const Matrix l = loss_matrix(eta, 10);
      for (int n = 0; n <= 10; ++n) {
        CHECK(c.col(n).sum() == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(l.col(n).sum() == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(c.col(n).minCoeff() >= 0.0);
        CHECK(l.col(n).minCoeff() >= 0.0);
      }
    }
  }
}

TEST_CASE("forward chain on a two-bin detector, by hand") {
  // two photons, eta = 0.5: photon survival [1/4, 1/2, 1/4]; two survivors
  // collide with probability 1/2
  const DetectorModel model = make_detector_model(2, 0.5, 2);
  const ClickStatistics p = forward(model, fock_state(2, 2));
  REQUIRE(p.max_clicks() == 2);
  CHECK(p.probs(0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p.probs(1) == doctest::Approx(0.625).epsilon(1e-14));
  CHECK(p.probs(2) == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("forward rejects a truncation mismatch") {
  const DetectorModel model = make_detector_model(4, 0.5, 3);
  CHECK_THROWS_AS(forward(model, fock_state(1, 2)), NumericalError);
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(make_detector_model(0, 0.5, 4), NumericalError);
  CHECK_THROWS_AS(make_detector_model(4, 0.0, 4), NumericalError);
  Vector q(2);
  q << 0.9, 0.2;
  CHECK_THROWS_AS(make_detector_model(q, 0.5, 4), NumericalError);
}

TEST_CASE("click counts normalize or refuse") {
  ClickCounts counts;
  counts.counts = CountVector::Zero(3);
  CHECK_THROWS_AS(counts.normalized(), DataError);
  counts.counts << 6, 3, 1;
  const ClickStatistics stats = counts.normalized();
  CHECK(stats.probs(0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(counts.total() == 10);
}
