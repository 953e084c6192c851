// SPDX-License-Identifier: Apache-2.0
//
// Dense kernels used by the CCA fits. Everything runs in double precision;
// 32-bit embeddings are widened when they are loaded.

#pragma once

#include <Eigen/Dense>
#include <string_view>

namespace dcca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Relative eigenvalue floor applied by sym_inv_sqrt (fraction of the largest eigenvalue).
inline constexpr double kDefaultEigFloor = 1e-10;

/// Rejects empty matrices and matrices carrying NaN/Inf (kind "NonFinite").
void require_valid(const Matrix& m, std::string_view what);

struct Centered {
  Matrix centered;
  Vector means;
};

Centered center_columns(const Matrix& x);

/// Eigenpairs of a symmetric matrix, eigenvalues descending. Eigenvector signs
/// are fixed so the largest-magnitude entry of each column is positive.
struct SymEig {
  Vector eigenvalues;
  Matrix eigenvectors;
};

SymEig sym_eig(const Matrix& s);

/// Q max(L, floor)^{-1/2} Q^T with floor = eig_floor * max(L).
/// Throws NotSymmetric when ||S - S^T||_F > 1e-9 ||S||_F.
Matrix sym_inv_sqrt(const Matrix& s, double eig_floor = kDefaultEigFloor);

struct ThinSvd {
  Matrix u;
  Vector singular_values;
  Matrix vt;
};

/// Top-k singular triplets, descending. For each triplet the largest-magnitude
/// entry of the U column is made positive (V flipped with it).
ThinSvd thin_svd(const Matrix& a, Index k);

/// Ratio of largest to smallest singular value; +inf for singular input.
double condition_number(const Matrix& a);

}  // namespace dcca
