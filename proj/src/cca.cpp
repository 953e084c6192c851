// SPDX-License-Identifier: Apache-2.0

#include "dcca/cca.hpp"

#include <algorithm>
#include <string>

#include "dcca/error.hpp"

namespace dcca {

Matrix regularized_covariance(const Matrix& centered, double reg_eps, double* ridge_out) {
  Matrix s = centered.transpose() * centered;
  const double trace = s.trace();
  if (!(trace > 0.0)) {
    throw_numerical("DegenerateView", "view has zero total variance");
  }
  const double ridge = reg_eps * trace / static_cast<double>(s.rows());
  s.diagonal().array() += ridge;
  if (ridge_out != nullptr) *ridge_out = ridge;
  return s;
}

CcaTransform fit_cca(const Matrix& x_a, const Matrix& x_b, const CcaConfig& config) {
  require_valid(x_a, "fit_cca view A");
  require_valid(x_b, "fit_cca view B");
  if (x_a.rows() != x_b.rows()) {
    throw_data("ShapeMismatch", "fit_cca: views have " + std::to_string(x_a.rows()) + " and " +
                                    std::to_string(x_b.rows()) + " rows");
  }
  if (x_a.rows() < 2) throw_data("ShapeMismatch", "fit_cca: need at least two samples");
  if (config.reg_eps < 0.0) throw_usage("InvalidArgument", "fit_cca: reg_eps must be >= 0");
  const Index limit = std::min({x_a.cols(), x_b.cols(), x_a.rows() - 1});
  if (config.out_dim < 1 || config.out_dim > limit) {
    throw_data("RankRequestTooLarge", "fit_cca: out_dim " + std::to_string(config.out_dim) +
                                          " exceeds min(d_A, d_B, rows - 1) = " +
                                          std::to_string(limit));
  }

  const Centered ca = center_columns(x_a);
  const Centered cb = center_columns(x_b);

  CcaTransform t;
  t.config = config;
  t.mean_a = ca.means;
  t.mean_b = cb.means;

  const Matrix s_aa = regularized_covariance(ca.centered, config.reg_eps, &t.ridge_a);
  const Matrix s_bb = regularized_covariance(cb.centered, config.reg_eps, &t.ridge_b);
  const Matrix s_ab = ca.centered.transpose() * cb.centered;

  const Matrix white_a = sym_inv_sqrt(s_aa, config.eig_floor);
  const Matrix white_b = sym_inv_sqrt(s_bb, config.eig_floor);
  const ThinSvd svd = thin_svd(white_a * s_ab * white_b, config.out_dim);

  t.w_a = white_a * svd.u;
  t.w_b = white_b * svd.vt.transpose();
  t.correlations = svd.singular_values;
  return t;
}

Matrix project(const CcaTransform& t, const Matrix& x, View side) {
  require_valid(x, "project");
  const Matrix& w = side == View::A ? t.w_a : t.w_b;
  const Vector& mean = side == View::A ? t.mean_a : t.mean_b;
  if (x.cols() != w.rows()) {
    throw_data("ShapeMismatch", "project: input has " + std::to_string(x.cols()) +
                                    " columns, transform expects " + std::to_string(w.rows()));
  }
  return (x.rowwise() - mean.transpose()) * w;
}

}  // namespace dcca
