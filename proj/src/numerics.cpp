// SPDX-License-Identifier: Apache-2.0

#include "dcca/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dcca/error.hpp"

namespace dcca {

namespace {

// Flips column j of `primary` (and of `secondary`, if given) so that the
// largest-magnitude entry of primary's column is positive. Ties go to the
// lowest row index.
void fix_column_signs(Matrix& primary, Matrix* secondary_cols) {
  for (Index j = 0; j < primary.cols(); ++j) {
    Index best = 0;
    double best_abs = -1.0;
    for (Index i = 0; i < primary.rows(); ++i) {
      const double a = std::abs(primary(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (primary(best, j) < 0.0) {
      primary.col(j) *= -1.0;
      if (secondary_cols != nullptr) secondary_cols->col(j) *= -1.0;
    }
  }
}

}  // namespace

void require_valid(const Matrix& m, std::string_view what) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw_data("ShapeMismatch", std::string(what) + ": matrix must have at least one row and column");
  }
  if (!m.allFinite()) {
    throw_numerical("NonFinite", std::string(what) + ": matrix contains NaN or Inf");
  }
}

Centered center_columns(const Matrix& x) {
  require_valid(x, "center_columns");
  Centered out;
  out.means = x.colwise().mean().transpose();
  out.centered = x.rowwise() - out.means.transpose();
  return out;
}

SymEig sym_eig(const Matrix& s) {
  require_valid(s, "sym_eig");
  if (s.rows() != s.cols()) throw_data("ShapeMismatch", "sym_eig: matrix is not square");
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw_numerical("EigenFailure", "sym_eig: eigensolver did not converge");
  }
  // Eigen returns ascending order.
  SymEig out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  fix_column_signs(out.eigenvectors, nullptr);
  return out;
}

Matrix sym_inv_sqrt(const Matrix& s, double eig_floor) {
  require_valid(s, "sym_inv_sqrt");
  if (s.rows() != s.cols()) throw_data("ShapeMismatch", "sym_inv_sqrt: matrix is not square");
  if (!(eig_floor > 0.0)) throw_usage("InvalidArgument", "sym_inv_sqrt: eig_floor must be > 0");
  const double norm = s.norm();
  if ((s - s.transpose()).norm() > 1e-9 * std::max(norm, std::numeric_limits<double>::min())) {
    throw_numerical("NotSymmetric", "sym_inv_sqrt: input asymmetry exceeds 1e-9 relative");
  }

  const SymEig eig = sym_eig(s);
  const double largest = eig.eigenvalues(0);
  const double floor =
      largest > 0.0 ? eig_floor * largest : std::numeric_limits<double>::min();
  Vector scale(eig.eigenvalues.size());
  for (Index i = 0; i < scale.size(); ++i) {
    scale(i) = 1.0 / std::sqrt(std::max(eig.eigenvalues(i), floor));
  }
  const Matrix& q = eig.eigenvectors;
  Matrix b = q * scale.asDiagonal() * q.transpose();
  return 0.5 * (b + b.transpose());
}

ThinSvd thin_svd(const Matrix& a, Index k) {
  require_valid(a, "thin_svd");
  const Index max_rank = std::min(a.rows(), a.cols());
  if (k < 1 || k > max_rank) {
    throw_data("RankRequestTooLarge", "thin_svd: requested rank " + std::to_string(k) +
                                          " outside [1, " + std::to_string(max_rank) + "]");
  }
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ThinSvd out;
  out.u = svd.matrixU().leftCols(k);
  out.singular_values = svd.singularValues().head(k);
  Matrix v = svd.matrixV().leftCols(k);
  fix_column_signs(out.u, &v);
  out.vt = v.transpose();
  return out;
}

double condition_number(const Matrix& a) {
  require_valid(a, "condition_number");
  Eigen::BDCSVD<Matrix> svd(a);
  const Vector& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

}  // namespace dcca
