#pragma once

#include <cmath>
#include <string>

#include "mrbess/types.hpp"

namespace mrbess {

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.array().isFinite().all();
}

}  // namespace detail

/// Columns of X indexed by `cols`, in order.
template <typename Derived>
Matrix<typename Derived::Scalar> select_columns(const Eigen::MatrixBase<Derived>& X,
                                                const ActiveSet& cols) {
  Matrix<typename Derived::Scalar> out(X.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = X.col(cols[k]);
  return out;
}

template <typename Derived>
Matrix<typename Derived::Scalar> select_rows(const Eigen::MatrixBase<Derived>& M,
                                             const std::vector<Index>& rows) {
  Matrix<typename Derived::Scalar> out(static_cast<Index>(rows.size()), M.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = M.row(rows[k]);
  return out;
}

/// Count of singular values above rel_cutoff * sigma_max. Zero matrix has rank 0.
template <typename Derived>
Index numerical_rank(const Eigen::MatrixBase<Derived>& M, double rel_cutoff = 1e-8) {
  using Scalar = typename Derived::Scalar;
  if (M.size() == 0) return 0;
  Eigen::BDCSVD<Matrix<Scalar>> svd(M.eval());
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= Scalar(0)) return 0;
  const Scalar cut = Scalar(rel_cutoff) * sv(0);
  return (sv.array() > cut).count();
}

/// Validates shapes and finiteness, optionally centers, then scales each
/// nonzero column of X to norm sqrt(n).
template <typename DX, typename DY>
Dataset<typename DX::Scalar> validate_and_normalize(const Eigen::MatrixBase<DX>& X_raw,
                                                    const Eigen::MatrixBase<DY>& Y,
                                                    bool center = false) {
  using Scalar = typename DX::Scalar;
  if (X_raw.rows() != Y.rows())
    throw InvalidInput("dimension mismatch: X has " + std::to_string(X_raw.rows()) +
                       " rows, Y has " + std::to_string(Y.rows()));
  if (X_raw.rows() < 3)
    throw InvalidInput("need at least 3 observations, got " + std::to_string(X_raw.rows()));
  if (X_raw.cols() < 1 || Y.cols() < 1) throw InvalidInput("X and Y need at least one column");
  if (!detail::all_finite(X_raw)) throw InvalidInput("non-finite entry in X");
  if (!detail::all_finite(Y)) throw InvalidInput("non-finite entry in Y");

  Dataset<Scalar> d;
  d.X = X_raw;
  d.Y = Y;
  d.centered = center;
  if (center) {
    d.x_means = d.X.colwise().mean().transpose();
    d.y_means = d.Y.colwise().mean().transpose();
    d.X.rowwise() -= d.x_means.transpose();
    d.Y.rowwise() -= d.y_means.transpose();
  }
  const Scalar sqrt_n = std::sqrt(static_cast<Scalar>(d.X.rows()));
  d.col_scales.resize(d.X.cols());
  for (Index j = 0; j < d.X.cols(); ++j) {
    if ((d.X.col(j).array() == Scalar(0)).all()) {
      d.col_scales(j) = 0;
      continue;
    }
    const Scalar scale = d.X.col(j).norm() / sqrt_n;
    d.col_scales(j) = scale;
    d.X.col(j) /= scale;
  }
  return d;
}

/// Maps coefficients fitted on the normalized design back to the raw column scale.
template <typename DC, typename DS>
Matrix<typename DC::Scalar> denormalize_coefficients(const Eigen::MatrixBase<DC>& C_norm,
                                                     const Eigen::MatrixBase<DS>& col_scales) {
  using Scalar = typename DC::Scalar;
  if (C_norm.rows() != col_scales.size())
    throw InvalidInput("coefficient rows (" + std::to_string(C_norm.rows()) +
                       ") do not match col_scales length (" + std::to_string(col_scales.size()) +
                       ")");
  Matrix<Scalar> out(C_norm.rows(), C_norm.cols());
  for (Index j = 0; j < C_norm.rows(); ++j) {
    if (col_scales(j) == Scalar(0))
      out.row(j).setZero();
    else
      out.row(j) = C_norm.row(j) / col_scales(j);
  }
  return out;
}

/// Estimation, prediction and support-recovery metrics against a known truth.
/// A row counts as selected iff its norm is exactly nonzero. A rate whose
/// denominator is zero is reported as 0.
template <typename DH, typename DS, typename DX>
MetricsRecord compute_metrics(const Eigen::MatrixBase<DH>& C_hat, const Eigen::MatrixBase<DS>& C_star,
                              const Eigen::MatrixBase<DX>& X, double elapsed_s) {
  if (C_hat.rows() != C_star.rows() || C_hat.cols() != C_star.cols())
    throw InvalidInput("C_hat and C_star shapes differ");
  if (X.cols() != C_hat.rows()) throw InvalidInput("X columns do not match coefficient rows");
  const auto p = static_cast<double>(C_hat.rows());
  const auto q = static_cast<double>(C_hat.cols());
  const auto n = static_cast<double>(X.rows());
  const auto diff = (C_hat - C_star).eval();

  MetricsRecord m;
  m.er_c = static_cast<double>(diff.squaredNorm()) / (p * q);
  m.er_xc = static_cast<double>((X * diff).squaredNorm()) / (n * q);

  Index tp = 0, fp = 0, tn = 0, fn = 0;
  for (Index j = 0; j < C_hat.rows(); ++j) {
    const bool truth = (C_star.row(j).array() != 0).any();
    const bool sel = (C_hat.row(j).array() != 0).any();
    if (truth && sel) ++tp;
    else if (truth) ++fn;
    else if (sel) ++fp;
    else ++tn;
  }
  m.fpr = (tn + fp) == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(tn + fp);
  m.fnr = (tp + fn) == 0 ? 0.0 : static_cast<double>(fn) / static_cast<double>(tp + fn);
  m.est_rank = numerical_rank(C_hat);
  m.wall_time_s = elapsed_s;
  return m;
}

}  // namespace mrbess
