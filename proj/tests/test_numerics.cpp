// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include "doctest.h"
#include "dcca/error.hpp"
#include "dcca/numerics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dcca;
using dcca::testing::random_matrix;
using dcca::testing::random_spd;

namespace {

std::string error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

}  // namespace

TEST_CASE("center_columns small cases") {
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  const auto c = center_columns(x);
  Matrix expect(2, 2);
  expect << -1, -1, 1, 1;
  CHECK((c.centered - expect).norm() == 0.0);
  CHECK(c.means(0) == 2.0);
  CHECK(c.means(1) == 3.0);

  Matrix one = Matrix::Zero(1, 2);
  const auto c1 = center_columns(one);
  CHECK(c1.centered.norm() == 0.0);
  CHECK(c1.means.norm() == 0.0);
}

TEST_CASE("center_columns zero column means") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Matrix x = random_matrix(seed, 10, 3) * 7.0;
    const auto c = center_columns(x);
    REQUIRE(c.means.size() == 3);
    for (Index j = 0; j < 3; ++j) {
      double s = 0.0;
      for (Index i = 0; i < 10; ++i) s += c.centered(i, j);
      CHECK(std::abs(s / 10.0) < 1e-12);
    }
  }
}

TEST_CASE("require_valid rejects non-finite and empty input") {
  Matrix x = Matrix::Ones(2, 2);
  x(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(error_kind([&] { center_columns(x); }) == "NonFinite");
  x(1, 0) = std::numeric_limits<double>::infinity();
  CHECK(error_kind([&] { sym_inv_sqrt(x); }) == "NonFinite");
  CHECK(error_kind([&] { center_columns(Matrix(0, 3)); }) == "ShapeMismatch");
}

TEST_CASE("sym_inv_sqrt closed forms") {
  const Matrix i3 = Matrix::Identity(3, 3);
  CHECK((sym_inv_sqrt(i3, 1e-12) - i3).norm() < 1e-14);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 9;
  const Matrix b = sym_inv_sqrt(d);
  CHECK(b(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(std::abs(b(0, 1)) < 1e-15);
  CHECK(std::abs(b(1, 0)) < 1e-15);
}

TEST_CASE("sym_inv_sqrt whitens random SPD matrices") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const Matrix a = random_spd(seed, 5);
    const Matrix b = sym_inv_sqrt(a);
    CHECK((b - b.transpose()).norm() < 1e-12);
    // products by explicit loops
    Matrix bab = Matrix::Zero(5, 5);
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 5; ++j)
        for (Index p = 0; p < 5; ++p)
          for (Index q = 0; q < 5; ++q) bab(i, j) += b(i, p) * a(p, q) * b(q, j);
    CHECK((bab - Matrix::Identity(5, 5)).norm() < 1e-8);
  }
}

TEST_CASE("sym_inv_sqrt squared is the inverse") {
  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    const Matrix a = random_spd(seed, 6);
    const auto ev = oracle::jacobi_eigenvalues(a);
    REQUIRE(ev.front() / ev.back() < 1e6);
    const Matrix b = sym_inv_sqrt(a);
    const Matrix prod = (b * b) * a;
    CHECK((prod - Matrix::Identity(6, 6)).norm() < 1e-7);
  }
}

TEST_CASE("sym_inv_sqrt floors eigenvalues relative to the largest") {
  Matrix s = Matrix::Zero(2, 2);
  s(0, 0) = 1.0;  // second eigenvalue is 0 -> floored to 1e-10
  const Matrix b = sym_inv_sqrt(s);
  CHECK(b(0, 0) == doctest::Approx(1.0));
  CHECK(b(1, 1) == doctest::Approx(1e5).epsilon(1e-9));
  const Matrix b2 = sym_inv_sqrt(s * 100.0);
  CHECK(b2(1, 1) == doctest::Approx(1e4).epsilon(1e-9));
}

TEST_CASE("sym_inv_sqrt errors") {
  Matrix s(2, 2);
  s << 1, 0.5, 0.2, 1;
  CHECK(error_kind([&] { sym_inv_sqrt(s); }) == "NotSymmetric");
  CHECK(error_kind([&] { sym_inv_sqrt(Matrix::Identity(2, 2), 0.0); }) == "InvalidArgument");
  CHECK(error_kind([&] { sym_inv_sqrt(Matrix::Identity(2, 3)); }) == "ShapeMismatch");
  // tiny asymmetry inside tolerance
  Matrix t = Matrix::Identity(3, 3);
  t(0, 1) = 1e-12;
  CHECK_NOTHROW(sym_inv_sqrt(t));
}

TEST_CASE("sym_eig descending and matches Jacobi") {
  for (std::uint64_t seed = 300; seed < 310; ++seed) {
    const Matrix a = random_spd(seed, 5);
    const auto e = sym_eig(a);
    const auto ref = oracle::jacobi_eigenvalues(a);
    for (Index i = 0; i < 5; ++i) CHECK(std::abs(e.eigenvalues(i) - ref[static_cast<std::size_t>(i)]) < 1e-9);
    for (Index i = 1; i < 5; ++i) CHECK(e.eigenvalues(i - 1) >= e.eigenvalues(i));
  }
}

TEST_CASE("thin_svd diagonal") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 2;
  const auto s = thin_svd(d, 2);
  CHECK(s.singular_values(0) == doctest::Approx(3.0));
  CHECK(s.singular_values(1) == doctest::Approx(2.0));
}

TEST_CASE("thin_svd reconstruction, orthonormality, sign convention") {
  for (std::uint64_t seed = 400; seed < 430; ++seed) {
    const Matrix a = random_matrix(seed, 6, 4);
    const auto s = thin_svd(a, 4);
    const Matrix rec = s.u * s.singular_values.asDiagonal() * s.vt;
    CHECK((rec - a).norm() / a.norm() < 1e-9);
    CHECK((s.u.transpose() * s.u - Matrix::Identity(4, 4)).norm() < 1e-9);
    for (Index i = 1; i < 4; ++i) CHECK(s.singular_values(i - 1) >= s.singular_values(i));
    for (Index c = 0; c < 4; ++c) {
      Index arg = 0;
      s.u.col(c).cwiseAbs().maxCoeff(&arg);
      CHECK(s.u(arg, c) > 0.0);
    }
  }
}

TEST_CASE("thin_svd singular values are roots of eig(A^T A)") {
  for (std::uint64_t seed = 500; seed < 520; ++seed) {
    const Matrix a = random_matrix(seed, 7, 5);
    const auto s = thin_svd(a, 5);
    const auto e = sym_eig(a.transpose() * a);
    for (Index i = 0; i < 5; ++i)
      CHECK(std::abs(s.singular_values(i) - std::sqrt(e.eigenvalues(i))) < 1e-8);
  }
}

TEST_CASE("thin_svd truncation and rank errors") {
  const Matrix a = random_matrix(9, 5, 3);
  const auto s = thin_svd(a, 2);
  CHECK(s.u.rows() == 5);
  CHECK(s.u.cols() == 2);
  CHECK(s.vt.rows() == 2);
  CHECK(s.vt.cols() == 3);
  CHECK(error_kind([&] { thin_svd(a, 4); }) == "RankRequestTooLarge");
  CHECK(error_kind([&] { thin_svd(a, 0); }) == "RankRequestTooLarge");
}

TEST_CASE("numerics are deterministic") {
  const Matrix a = random_spd(77, 6);
  const Matrix b1 = sym_inv_sqrt(a);
  const Matrix b2 = sym_inv_sqrt(a);
  CHECK((b1.array() == b2.array()).all());
  const Matrix g = random_matrix(78, 8, 5);
  const auto s1 = thin_svd(g, 3);
  const auto s2 = thin_svd(g, 3);
  CHECK((s1.u.array() == s2.u.array()).all());
  CHECK((s1.vt.array() == s2.vt.array()).all());
}

TEST_CASE("condition_number") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 10;
  d(1, 1) = 0.1;
  CHECK(condition_number(d) == doctest::Approx(100.0));
  d(1, 1) = 0.0;
  CHECK(std::isinf(condition_number(d)));
}
