#pragma once

// Closed-form reduced-rank regression restricted to a row support, and the
// primal-dual update that drives the active-set iteration.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mrbess/model.hpp"
#include "mrbess/types.hpp"

namespace mrbess {

inline constexpr double kGramConditionLimit = 1e12;
inline constexpr double kPseudoInverseCutoff = 1e-12;
/// Eigenvalues at or below this fraction of the largest are treated as zero.
inline constexpr double kZeroEigenvalueCutoff = 1e-10;

/// Primal/dual iterate. Rows of B off the active set and rows of Gamma on it are zero.
template <typename Scalar>
struct PrimalDualState {
  Matrix<Scalar> B;
  Matrix<Scalar> Gamma;
  Matrix<Scalar> V;
  ActiveSet active_set;
};

/// delta[j] = ||b_j + gamma_j||_2.
template <typename Scalar>
struct Sacrifice {
  Vector<Scalar> delta;
};

template <typename Scalar>
struct RightFactors {
  Matrix<Scalar> V;            // q x r, orthonormal columns
  Vector<Scalar> eigenvalues;  // of Y^T P_A Y, descending, every one the route produced
  bool rank_deficient = false;
};

template <typename Scalar>
struct RestrictedFit {
  Matrix<Scalar> C;
  Matrix<Scalar> B;
  Matrix<Scalar> V;
  double loss = 0;
  Vector<Scalar> eigenvalues;
  bool rank_deficient = false;
};

enum class EigenRoute { automatic, factor, gram };

/// Inverse and inverse square root of a symmetric positive (semi)definite Gram matrix.
template <typename Scalar>
struct GramFactor {
  Matrix<Scalar> inverse;
  Matrix<Scalar> inv_sqrt;
  bool truncated = false;
};

template <typename Scalar>
GramFactor<Scalar> factor_gram(const Matrix<Scalar>& G, GramPolicy policy) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(G);
  if (es.info() != Eigen::Success) throw SingularGram(G.rows(), std::numeric_limits<double>::infinity());
  const Vector<Scalar>& lam = es.eigenvalues();  // ascending
  const Matrix<Scalar>& U = es.eigenvectors();
  const Scalar lmax = lam(lam.size() - 1);
  const Scalar lmin = lam(0);
  const double cond = (lmin > Scalar(0) && lmax > Scalar(0))
                          ? static_cast<double>(lmax / lmin)
                          : std::numeric_limits<double>::infinity();

  GramFactor<Scalar> out;
  Vector<Scalar> inv(lam.size()), inv_sqrt(lam.size());
  if (cond < kGramConditionLimit) {
    inv = lam.cwiseInverse();
    inv_sqrt = lam.cwiseSqrt().cwiseInverse();
  } else if (policy == GramPolicy::pseudo_inverse) {
    out.truncated = true;
    const Scalar cut = Scalar(kPseudoInverseCutoff) * std::max(lmax, Scalar(0));
    for (Index i = 0; i < lam.size(); ++i) {
      const bool keep = lmax > Scalar(0) && lam(i) > cut;
      inv(i) = keep ? Scalar(1) / lam(i) : Scalar(0);
      inv_sqrt(i) = keep ? Scalar(1) / std::sqrt(lam(i)) : Scalar(0);
    }
  } else {
    throw SingularGram(G.rows(), cond);
  }
  out.inverse = U * inv.asDiagonal() * U.transpose();
  out.inv_sqrt = U * inv_sqrt.asDiagonal() * U.transpose();
  return out;
}

/// (X_A^T X_A)^{-1}, or its truncated pseudo-inverse when allowed and needed.
template <typename DX>
Matrix<typename DX::Scalar> restricted_gram_inverse(const Eigen::MatrixBase<DX>& X, const ActiveSet& A,
                                                    GramPolicy policy) {
  using Scalar = typename DX::Scalar;
  if (A.empty()) throw InvalidInput("restricted_gram_inverse: empty active set");
  const Matrix<Scalar> XA = select_columns(X, A);
  return factor_gram<Scalar>(XA.transpose() * XA, policy).inverse;
}

namespace detail {

/// Makes the largest-magnitude entry of each column positive (first index wins ties).
template <typename Scalar>
void fix_signs(Matrix<Scalar>& V) {
  for (Index c = 0; c < V.cols(); ++c) {
    Index best = 0;
    Scalar best_abs = -1;
    for (Index i = 0; i < V.rows(); ++i) {
      const Scalar a = std::abs(V(i, c));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (V(best, c) < Scalar(0)) V.col(c) = -V.col(c);
  }
}

/// Extends the first `kept` orthonormal columns of V with Gram-Schmidt images of
/// the standard basis, scanning e_0, e_1, ... in order.
template <typename Scalar>
void complete_basis(Matrix<Scalar>& V, Index kept) {
  const Index q = V.rows();
  const Scalar accept = Scalar(0.5) / std::sqrt(static_cast<Scalar>(q));
  Index filled = kept;
  for (Index i = 0; i < q && filled < V.cols(); ++i) {
    Vector<Scalar> w = Vector<Scalar>::Unit(q, i);
    for (int pass = 0; pass < 2; ++pass) {
      const auto basis = V.leftCols(filled);
      w -= basis * (basis.transpose() * w);
    }
    const Scalar nrm = w.norm();
    if (nrm > accept) V.col(filled++) = w / nrm;
  }
}

/// Assembles V from eigenpairs sorted descending; eigenvectors whose eigenvalue
/// is numerically zero are replaced by the deterministic completion.
template <typename Scalar>
RightFactors<Scalar> assemble_factors(const Matrix<Scalar>& vecs_desc, const Vector<Scalar>& vals_desc,
                                      Index q, Index r) {
  RightFactors<Scalar> out;
  out.eigenvalues = vals_desc.cwiseMax(Scalar(0));
  const Scalar top = out.eigenvalues.size() > 0 ? out.eigenvalues(0) : Scalar(0);
  Index positive = 0;
  if (top > Scalar(0)) {
    const Scalar cut = Scalar(kZeroEigenvalueCutoff) * top;
    while (positive < out.eigenvalues.size() && out.eigenvalues(positive) > cut) ++positive;
  }
  const Index kept = std::min(positive, r);
  out.V = Matrix<Scalar>::Zero(q, r);
  out.V.leftCols(kept) = vecs_desc.leftCols(kept);
  if (kept < r) {
    out.rank_deficient = true;
    complete_basis(out.V, kept);
  }
  fix_signs(out.V);
  return out;
}

}  // namespace detail

/// Top-r right singular vectors of M (columns of the returned V), same sign and
/// completion conventions as top_r_right_factors. Eigenvalues are squared singular values.
template <typename DM>
RightFactors<typename DM::Scalar> top_right_singular_vectors(const Eigen::MatrixBase<DM>& M, Index r) {
  using Scalar = typename DM::Scalar;
  if (r < 1 || r > M.cols()) throw InvalidConfig("requested " + std::to_string(r) + " right singular vectors of a matrix with " + std::to_string(M.cols()) + " columns");
  Eigen::BDCSVD<Matrix<Scalar>> svd(M.eval(), Eigen::ComputeThinV);
  const Vector<Scalar> vals = svd.singularValues().array().square().matrix();
  return detail::assemble_factors<Scalar>(svd.matrixV(), vals, M.cols(), r);
}

namespace detail {

/// Quantities shared by every computation on a fixed active set.
template <typename Scalar>
struct RestrictedSystem {
  Matrix<Scalar> XA;    // n x |A|
  Matrix<Scalar> XtYA;  // |A| x q
  GramFactor<Scalar> gram;

  template <typename DX, typename DY>
  RestrictedSystem(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y, const ActiveSet& A,
                   GramPolicy policy)
      : XA(select_columns(X, A)), XtYA(XA.transpose() * Y), gram(factor_gram<Scalar>(XA.transpose() * XA, policy)) {}

  RightFactors<Scalar> right_factors(Index r, EigenRoute route) const {
    const Index q = XtYA.cols();
    if (route == EigenRoute::automatic) route = XA.cols() < q ? EigenRoute::factor : EigenRoute::gram;
    if (route == EigenRoute::factor) {
      Eigen::BDCSVD<Matrix<Scalar>> svd(gram.inv_sqrt * XtYA, Eigen::ComputeThinV);
      const Vector<Scalar> vals = svd.singularValues().array().square().matrix();
      return assemble_factors<Scalar>(svd.matrixV(), vals, q, r);
    }
    Matrix<Scalar> S = XtYA.transpose() * gram.inverse * XtYA;
    S = (S + S.transpose()).eval() * Scalar(0.5);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(S);
    const Vector<Scalar> vals = es.eigenvalues().reverse();
    const Matrix<Scalar> vecs = es.eigenvectors().rowwise().reverse();
    return assemble_factors<Scalar>(vecs, vals, q, r);
  }

  /// Rows of B on A: (X_A^T X_A)^{-1} X_A^T Y V.
  Matrix<Scalar> active_coefficients(const Matrix<Scalar>& V) const { return gram.inverse * (XtYA * V); }
};

inline void check_support(const ActiveSet& A, Index p) {
  if (A.empty()) throw InvalidInput("active set is empty");
  for (std::size_t k = 0; k < A.size(); ++k) {
    if (A[k] < 0 || A[k] >= p) throw InvalidInput("active index " + std::to_string(A[k]) + " out of range");
    if (k > 0 && A[k] <= A[k - 1]) throw InvalidInput("active set must be sorted and unique");
  }
}

inline void check_rank(Index r, Index support, Index q, Index n) {
  if (r < 1 || r > std::min({support, q, n}))
    throw InvalidConfig("rank " + std::to_string(r) + " must lie in [1, min(|A|, q, n)] = [1, " +
                        std::to_string(std::min({support, q, n})) + "]");
}

}  // namespace detail

/// Top-r eigenvectors of Y^T X_A (X_A^T X_A)^{-1} X_A^T Y, descending by eigenvalue.
template <typename DX, typename DY>
RightFactors<typename DX::Scalar> top_r_right_factors(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y,
                                                      const ActiveSet& A, Index r,
                                                      GramPolicy policy = GramPolicy::error_on_singular,
                                                      EigenRoute route = EigenRoute::automatic) {
  using Scalar = typename DX::Scalar;
  detail::check_support(A, X.cols());
  detail::check_rank(r, static_cast<Index>(A.size()), Y.cols(), X.rows());
  return detail::RestrictedSystem<Scalar>(X, Y, A, policy).right_factors(r, route);
}

/// Reduced-rank regression of Y on the columns A of X, with rank r.
template <typename DX, typename DY>
RestrictedFit<typename DX::Scalar> rrr_restricted_fit(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y,
                                                      const ActiveSet& A, Index r,
                                                      GramPolicy policy = GramPolicy::error_on_singular) {
  using Scalar = typename DX::Scalar;
  detail::check_support(A, X.cols());
  detail::check_rank(r, static_cast<Index>(A.size()), Y.cols(), X.rows());
  const detail::RestrictedSystem<Scalar> sys(X, Y, A, policy);
  auto rf = sys.right_factors(r, EigenRoute::automatic);
  const Matrix<Scalar> BA = sys.active_coefficients(rf.V);

  RestrictedFit<Scalar> fit;
  fit.B = Matrix<Scalar>::Zero(X.cols(), r);
  for (std::size_t k = 0; k < A.size(); ++k) fit.B.row(A[k]) = BA.row(static_cast<Index>(k));
  fit.C = fit.B * rf.V.transpose();
  fit.loss = static_cast<double>((Y - sys.XA * BA * rf.V.transpose()).squaredNorm()) /
             (2.0 * static_cast<double>(X.rows()));
  fit.V = std::move(rf.V);
  fit.eigenvalues = std::move(rf.eigenvalues);
  fit.rank_deficient = rf.rank_deficient;
  return fit;
}

/// B_A = (X_A^T X_A)^{-1} X_A^T Y V; Gamma_I = X_I^T (Y V - X B) / n.
template <typename DX, typename DY, typename DV>
PrimalDualState<typename DX::Scalar> primal_dual_update(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y,
                                                        const ActiveSet& A, const Eigen::MatrixBase<DV>& V,
                                                        GramPolicy policy = GramPolicy::error_on_singular) {
  using Scalar = typename DX::Scalar;
  detail::check_support(A, X.cols());
  const detail::RestrictedSystem<Scalar> sys(X, Y, A, policy);
  const Matrix<Scalar> Vm = V;
  const Matrix<Scalar> BA = sys.active_coefficients(Vm);
  const Matrix<Scalar> resid = Y * Vm - sys.XA * BA;

  PrimalDualState<Scalar> st;
  st.V = Vm;
  st.active_set = A;
  st.B = Matrix<Scalar>::Zero(X.cols(), Vm.cols());
  st.Gamma = X.transpose() * resid / static_cast<Scalar>(X.rows());
  for (std::size_t k = 0; k < A.size(); ++k) {
    st.B.row(A[k]) = BA.row(static_cast<Index>(k));
    st.Gamma.row(A[k]).setZero();
  }
  return st;
}

template <typename Scalar>
Sacrifice<Scalar> sacrifices(const PrimalDualState<Scalar>& state) {
  return {(state.B + state.Gamma).rowwise().norm()};
}

}  // namespace mrbess
