// SPDX-License-Identifier: Apache-2.0
//
// Regularized two-view canonical correlation analysis.
//
// Covariances are plain cross products of the centered data (X^T X, no
// 1/(n-1) factor). Each auto-covariance gets a ridge of
// reg_eps * trace(S) / dim before whitening, so reg_eps is unit-free.

#pragma once

#include "dcca/numerics.hpp"

namespace dcca {

struct CcaConfig {
  Index out_dim = 64;
  double reg_eps = 1e-4;
  double eig_floor = kDefaultEigFloor;
};

enum class View { A, B };

struct CcaTransform {
  Matrix w_a;  // d_A x out_dim
  Matrix w_b;  // d_B x out_dim
  Vector mean_a;
  Vector mean_b;
  Vector correlations;  // singular values of the whitened cross-covariance, descending
  CcaConfig config;
  // Scalar ridges that were added to X_A^T X_A and X_B^T X_B at fit time.
  double ridge_a = 0.0;
  double ridge_b = 0.0;

  Index input_dim(View side) const { return side == View::A ? w_a.rows() : w_b.rows(); }
  Index output_dim() const { return w_a.cols(); }
};

/// Fits W_A, W_B maximizing corr(X_A W_A, X_B W_B) subject to
/// W_A^T S_AA W_A = I and W_B^T S_BB W_B = I (regularized covariances).
CcaTransform fit_cca(const Matrix& x_a, const Matrix& x_b, const CcaConfig& config);

/// (x - mean_side) * W_side.
Matrix project(const CcaTransform& t, const Matrix& x, View side);

inline const Vector& canonical_correlations(const CcaTransform& t) { return t.correlations; }

/// Regularized auto-covariance exactly as used by fit_cca; exposed so callers
/// can check the whitening constraint.
Matrix regularized_covariance(const Matrix& centered, double reg_eps, double* ridge_out = nullptr);

}  // namespace dcca
