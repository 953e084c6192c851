// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "dcca/cca.hpp"
#include "dcca/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dcca;
using dcca::testing::random_matrix;

namespace {

std::string error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

CcaConfig cfg(Index out_dim, double reg) {
  CcaConfig c;
  c.out_dim = out_dim;
  c.reg_eps = reg;
  return c;
}

// W^T S_reg W - I, with S_reg rebuilt by the oracle.
double constraint_error(const Matrix& x, const Matrix& w, double reg) {
  const Matrix s = oracle::reg_cov(oracle::centered(x), reg);
  return (w.transpose() * s * w - Matrix::Identity(w.cols(), w.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("identical views correlate perfectly") {
  const Matrix x = random_matrix(1, 20, 3);
  const auto t = fit_cca(x, x, cfg(3, 0.0));
  for (Index i = 0; i < 3; ++i) CHECK(std::abs(t.correlations(i) - 1.0) < 1e-8);
  const Matrix za = project(t, x, View::A);
  const Matrix zb = project(t, x, View::B);
  for (Index c = 0; c < 3; ++c) CHECK(std::abs(oracle::pearson(za.col(c), zb.col(c)) - 1.0) < 1e-8);
}

TEST_CASE("invertible linear map of a view keeps correlations at one") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const Matrix x = random_matrix(seed, 30, 4);
    Matrix r = random_matrix(seed + 1000, 4, 4) + 3.0 * Matrix::Identity(4, 4);
    const auto t = fit_cca(x, x * r, cfg(4, 0.0));
    for (Index i = 0; i < 4; ++i) CHECK(std::abs(t.correlations(i) - 1.0) < 1e-8);
  }
}

TEST_CASE("40x4 vs 40x3 matches the alternating-maximization oracle") {
  const Matrix xa = random_matrix(40, 40, 4);
  Matrix xb = random_matrix(41, 40, 3);
  xb.col(0) += 0.8 * xa.col(1);
  xb.col(2) += 0.4 * xa.col(3);
  const auto t = fit_cca(xa, xb, cfg(2, 1e-4));
  const auto ref = oracle::cca_alternating(xa, xb, 1e-4, 2);
  for (Index i = 0; i < 2; ++i) CHECK(std::abs(t.correlations(i) - ref[static_cast<std::size_t>(i)]) < 1e-6);
}

TEST_CASE("random instances match the generalized-eigenproblem oracle") {
  SplitMix64 dims(99);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Index rows = 10 + static_cast<Index>(dims.below(91));
    const Index da = 1 + static_cast<Index>(dims.below(6));
    const Index db = 1 + static_cast<Index>(dims.below(6));
    const Index k = std::min(da, db);
    Matrix xa = random_matrix(seed * 2 + 1, rows, da);
    Matrix xb = random_matrix(seed * 2 + 2, rows, db);
    xb.col(0) += 0.5 * xa.col(da - 1);
    const auto t = fit_cca(xa, xb, cfg(k, 1e-4));
    const auto ref = oracle::cca_correlations(xa, xb, 1e-4, k);
    for (Index i = 0; i < k; ++i) CHECK(std::abs(t.correlations(i) - ref[static_cast<std::size_t>(i)]) < 1e-6);
    CHECK(constraint_error(xa, t.w_a, 1e-4) < 1e-6);
    CHECK(constraint_error(xb, t.w_b, 1e-4) < 1e-6);
  }
}

TEST_CASE("projection of fit data is whitened with reg_eps = 0") {
  const Matrix xa = random_matrix(5, 50, 4);
  const Matrix xb = random_matrix(6, 50, 5) + 0.3 * random_matrix(7, 50, 5);
  const auto t = fit_cca(xa, xb, cfg(4, 0.0));
  const Matrix za = project(t, xa, View::A);
  CHECK((za.transpose() * za - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-6);
  const Matrix zb = project(t, xb, View::B);
  CHECK((zb.transpose() * zb - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("the mean row projects to zero") {
  const Matrix xa = random_matrix(8, 25, 3) + Matrix::Constant(25, 3, 4.0);
  const Matrix xb = random_matrix(9, 25, 3);
  const auto t = fit_cca(xa, xb, cfg(2, 1e-4));
  const Matrix mean_row = t.mean_a.transpose();
  CHECK(project(t, mean_row, View::A).norm() < 1e-12);
  CHECK(error_kind([&] { project(t, Matrix::Zero(1, 5), View::A); }) == "ShapeMismatch");
}

TEST_CASE("stored correlations equal Pearson correlations of projections") {
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    const Matrix xa = random_matrix(seed, 60, 5);
    Matrix xb = random_matrix(seed + 500, 60, 4);
    xb.col(1) += xa.col(0) - 0.5 * xa.col(2);
    const auto t = fit_cca(xa, xb, cfg(3, 0.0));
    const Matrix za = project(t, xa, View::A);
    const Matrix zb = project(t, xb, View::B);
    for (Index c = 0; c < 3; ++c)
      CHECK(std::abs(oracle::pearson(za.col(c), zb.col(c)) - t.correlations(c)) < 1e-6);
    for (Index c = 1; c < 3; ++c) CHECK(t.correlations(c - 1) >= t.correlations(c));

    // the ridge only ever shrinks the reported values
    const auto r = fit_cca(xa, xb, cfg(3, 1e-4));
    const Matrix ra = project(r, xa, View::A);
    const Matrix rb = project(r, xb, View::B);
    for (Index c = 0; c < 3; ++c) {
      const double p = oracle::pearson(ra.col(c), rb.col(c));
      CHECK(r.correlations(c) <= p + 1e-12);
      CHECK(p - r.correlations(c) < 1e-3);
    }
  }
}

TEST_CASE("independent noise has small correlations") {
  // Simulation oracle: 99th percentile of the top correlation for 3 vs 3
  // independent gaussian columns over 500 samples.
  std::vector<double> tops;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto rho = oracle::cca_correlations(random_matrix(10000 + s, 500, 3),
                                              random_matrix(20000 + s, 500, 3), 0.0, 1);
    tops.push_back(rho[0]);
  }
  std::sort(tops.begin(), tops.end());
  const double p99 = tops[197];
  CHECK(p99 < 0.3);

  const auto t = fit_cca(random_matrix(3, 500, 3), random_matrix(4, 500, 3), cfg(3, 1e-4));
  for (Index i = 0; i < 3; ++i) CHECK(t.correlations(i) < 0.3);
}

TEST_CASE("scaling a view leaves correlations unchanged") {
  const Matrix xa = random_matrix(70, 40, 4);
  Matrix xb = random_matrix(71, 40, 3);
  xb.col(0) += xa.col(0);
  const auto t1 = fit_cca(xa, xb, cfg(3, 0.0));
  for (double scale : {1e-3, 0.5, 17.0, 1e4}) {
    const auto t2 = fit_cca(xa * scale, xb, cfg(3, 0.0));
    CHECK((t1.correlations - t2.correlations).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("fit is deterministic") {
  const Matrix xa = random_matrix(80, 30, 4);
  const Matrix xb = random_matrix(81, 30, 4);
  const auto t1 = fit_cca(xa, xb, cfg(3, 1e-4));
  const auto t2 = fit_cca(xa, xb, cfg(3, 1e-4));
  CHECK((t1.w_a.array() == t2.w_a.array()).all());
  CHECK((t1.w_b.array() == t2.w_b.array()).all());
  CHECK((t1.correlations.array() == t2.correlations.array()).all());
}

TEST_CASE("ridge is eps * trace / dim") {
  const Matrix xa = random_matrix(90, 30, 4);
  const auto t = fit_cca(xa, xa, cfg(2, 1e-3));
  const Matrix c = oracle::centered(xa);
  CHECK(t.ridge_a == doctest::Approx(1e-3 * (c.transpose() * c).trace() / 4.0).epsilon(1e-12));
  double ridge = 0.0;
  const Matrix s = regularized_covariance(c, 1e-3, &ridge);
  CHECK(ridge == doctest::Approx(t.ridge_a));
  CHECK((s - oracle::reg_cov(c, 1e-3)).norm() < 1e-9);
}

TEST_CASE("fit_cca errors") {
  const Matrix xa = random_matrix(1, 10, 3);
  CHECK(error_kind([&] { fit_cca(xa, random_matrix(2, 9, 3), cfg(2, 1e-4)); }) == "ShapeMismatch");
  CHECK(error_kind([&] { fit_cca(xa.topRows(1), xa.topRows(1), cfg(1, 1e-4)); }) == "ShapeMismatch");
  CHECK(error_kind([&] { fit_cca(xa, xa, cfg(4, 1e-4)); }) == "RankRequestTooLarge");
  const Matrix small = random_matrix(3, 3, 5);
  CHECK(error_kind([&] { fit_cca(small, small, cfg(3, 1e-4)); }) == "RankRequestTooLarge");
  const Matrix constant = Matrix::Constant(10, 3, 2.0);
  try {
    fit_cca(constant, xa, cfg(2, 1e-4));
    FAIL("expected DegenerateView");
  } catch (const Error& e) {
    CHECK(e.kind() == "DegenerateView");
    CHECK(e.category() == ErrorCategory::Numerical);
  }
}
