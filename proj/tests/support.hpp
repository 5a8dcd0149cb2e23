#pragma once

// Small fixtures shared by the unit tests: seeded Gaussian matrices,
// orthogonal designs and independent dense reference computations.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <random>

#include "mrbess/types.hpp"

namespace testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using mrbess::ActiveSet;
using mrbess::Index;

inline MatrixXd gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  MatrixXd M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = z(rng);
  return M;
}

/// n x p with X^T X = n I (requires p <= n).
inline MatrixXd orthogonal_design(Index n, Index p, std::mt19937_64& rng) {
  Eigen::HouseholderQR<MatrixXd> qr(gaussian(n, p, rng));
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, p);
  return Q * std::sqrt(static_cast<double>(n));
}

/// Columns scaled to norm sqrt(n), as produced by normalization.
inline MatrixXd normalized_gaussian(Index n, Index p, std::mt19937_64& rng) {
  MatrixXd X = gaussian(n, p, rng);
  for (Index j = 0; j < p; ++j) X.col(j) *= std::sqrt(static_cast<double>(n)) / X.col(j).norm();
  return X;
}

inline MatrixXd columns(const MatrixXd& X, const ActiveSet& A) {
  MatrixXd out(X.rows(), static_cast<Index>(A.size()));
  for (std::size_t k = 0; k < A.size(); ++k) out.col(static_cast<Index>(k)) = X.col(A[k]);
  return out;
}

/// Orthogonal projector onto span(X_A), built from a column-pivoting QR.
inline MatrixXd projector(const MatrixXd& X, const ActiveSet& A) {
  const MatrixXd XA = columns(X, A);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(XA);
  const Index k = qr.rank();
  const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(XA.rows(), k);
  return Q * Q.transpose();
}

/// Reference reduced-rank fit on support A: V from a dense eigensolve of
/// Y^T P Y, B_A from a QR least-squares solve. Returns C (p x q).
struct Reference {
  MatrixXd C;
  MatrixXd V;
  VectorXd eigenvalues;  // descending, all q
  double loss = 0;
};

inline Reference reference_rrr(const MatrixXd& X, const MatrixXd& Y, const ActiveSet& A, Index r) {
  const MatrixXd P = projector(X, A);
  const MatrixXd S = Y.transpose() * P * Y;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es((S + S.transpose()) / 2);
  const Index q = Y.cols();
  Reference ref;
  ref.eigenvalues = es.eigenvalues().reverse();
  ref.V = es.eigenvectors().rightCols(r).rowwise().reverse();
  const MatrixXd BA = columns(X, A).colPivHouseholderQr().solve(Y * ref.V);
  ref.C = MatrixXd::Zero(X.cols(), q);
  for (std::size_t k = 0; k < A.size(); ++k) ref.C.row(A[k]) = BA.row(static_cast<Index>(k)) * ref.V.transpose();
  ref.loss = (Y - X * ref.C).squaredNorm() / (2.0 * static_cast<double>(X.rows()));
  return ref;
}

/// Random sorted subset of {0..p-1} of size s.
inline ActiveSet random_subset(Index p, Index s, std::mt19937_64& rng) {
  ActiveSet all(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;
  std::shuffle(all.begin(), all.end(), rng);
  ActiveSet A(all.begin(), all.begin() + s);
  std::sort(A.begin(), A.end());
  return A;
}

/// Rank-r coefficient supported on rows `support`.
inline MatrixXd low_rank_coefficient(Index p, Index q, const ActiveSet& support, Index r, std::mt19937_64& rng,
                                     double scale = 1.0) {
  MatrixXd B = MatrixXd::Zero(p, r);
  const MatrixXd G = gaussian(static_cast<Index>(support.size()), r, rng);
  for (std::size_t k = 0; k < support.size(); ++k) B.row(support[k]) = G.row(static_cast<Index>(k));
  return scale * B * gaussian(q, r, rng).transpose();
}

inline double max_abs_diff(const MatrixXd& a, const MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace testing
