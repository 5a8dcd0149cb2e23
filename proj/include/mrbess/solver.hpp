#pragma once

// Active-set iteration for best-subset reduced-rank regression with fixed
// rank and row sparsity.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "mrbess/gic.hpp"
#include "mrbess/model.hpp"
#include "mrbess/rrr.hpp"
#include "mrbess/types.hpp"

namespace mrbess {

struct InitialActiveSet {
  ActiveSet active;
  /// Fewer than s eligible columns had a positive screening score.
  bool padded = false;
};

/// Indices of the s largest entries of delta, ties to the smaller index, returned sorted.
template <typename DD>
ActiveSet select_active(const Eigen::MatrixBase<DD>& delta, Index s) {
  const Index p = delta.size();
  if (s < 0 || s > p) throw InvalidConfig("sparsity " + std::to_string(s) + " outside [0, " + std::to_string(p) + "]");
  ActiveSet idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::partial_sort(idx.begin(), idx.begin() + s, idx.end(), [&](Index a, Index b) {
    if (delta(a) != delta(b)) return delta(a) > delta(b);
    return a < b;
  });
  idx.resize(static_cast<std::size_t>(s));
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace detail {

template <typename DX>
std::vector<bool> zero_columns(const Eigen::MatrixBase<DX>& X) {
  std::vector<bool> z(static_cast<std::size_t>(X.cols()));
  for (Index j = 0; j < X.cols(); ++j) z[static_cast<std::size_t>(j)] = (X.col(j).array() == 0).all();
  return z;
}

template <typename Scalar>
void exclude(Vector<Scalar>& delta, const std::vector<bool>& zero_cols) {
  for (Index j = 0; j < delta.size(); ++j)
    if (zero_cols[static_cast<std::size_t>(j)]) delta(j) = -std::numeric_limits<Scalar>::infinity();
}

}  // namespace detail

/// Screening start: top-s rows of X^T Y V0 by l2 norm, V0 the top-r right singular vectors of Y.
template <typename DX, typename DY>
InitialActiveSet init_active_set(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y, Index r, Index s) {
  using Scalar = typename DX::Scalar;
  if (r < 1 || r > std::min(X.rows(), Y.cols()))
    throw InvalidConfig("screening rank " + std::to_string(r) + " must lie in [1, min(n, q)]");
  const auto zero_cols = detail::zero_columns(X);
  const auto eligible = static_cast<Index>(std::count(zero_cols.begin(), zero_cols.end(), false));
  if (s < 1 || s > eligible)
    throw InvalidConfig("sparsity " + std::to_string(s) + " exceeds the " + std::to_string(eligible) +
                        " nonzero columns of X");
  const auto v0 = top_right_singular_vectors(Y, r);
  Vector<Scalar> delta = (X.transpose() * (Y * v0.V)).rowwise().norm();
  detail::exclude(delta, zero_cols);

  InitialActiveSet out;
  out.active = select_active(delta, s);
  out.padded = (delta.array() > Scalar(0)).count() < s;
  return out;
}

namespace detail {

template <typename Scalar>
struct Iterate {
  Matrix<Scalar> C;
  Matrix<Scalar> B;
  Matrix<Scalar> V;
  Vector<Scalar> delta;
  double loss = 0;
  bool rank_deficient = false;
};

template <typename DX, typename DY>
Iterate<typename DX::Scalar> step(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y, const ActiveSet& A,
                                  Index r, GramPolicy policy) {
  using Scalar = typename DX::Scalar;
  const RestrictedSystem<Scalar> sys(X, Y, A, policy);
  auto rf = sys.right_factors(r, EigenRoute::automatic);
  const Matrix<Scalar> BA = sys.active_coefficients(rf.V);
  const Matrix<Scalar> fitted_scores = sys.XA * BA;  // X B
  Matrix<Scalar> Gamma = X.transpose() * (Y * rf.V - fitted_scores) / static_cast<Scalar>(X.rows());

  Iterate<Scalar> it;
  it.B = Matrix<Scalar>::Zero(X.cols(), r);
  for (std::size_t k = 0; k < A.size(); ++k) {
    it.B.row(A[k]) = BA.row(static_cast<Index>(k));
    Gamma.row(A[k]).setZero();
  }
  it.delta = (it.B + Gamma).rowwise().norm();
  it.C = it.B * rf.V.transpose();
  it.loss = static_cast<double>((Y - fitted_scores * rf.V.transpose()).squaredNorm()) /
            (2.0 * static_cast<double>(X.rows()));
  it.V = std::move(rf.V);
  it.rank_deficient = rf.rank_deficient;
  return it;
}

}  // namespace detail

/// Fixed-(rank, sparsity) solve on a normalized design.
template <typename DX, typename DY>
FitResult<typename DX::Scalar> solve_fixed(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y,
                                           const SolverConfig& config) {
  using Scalar = typename DX::Scalar;
  const Index n = X.rows(), p = X.cols(), q = Y.cols();
  if (Y.rows() != n) throw InvalidInput("X and Y row counts differ");
  if (config.tol <= 0 || !std::isfinite(config.tol)) throw InvalidConfig("tol must be a positive finite number");
  if (config.max_iter < 1) throw InvalidConfig("max_iter must be >= 1");
  if (config.rank < 1 || config.rank > std::min(q, n))
    throw InvalidConfig("rank " + std::to_string(config.rank) + " must lie in [1, min(q, n)] = [1, " +
                        std::to_string(std::min(q, n)) + "]");
  const auto zero_cols = detail::zero_columns(X);
  const auto eligible = static_cast<Index>(std::count(zero_cols.begin(), zero_cols.end(), false));
  const Index s = config.sparsity;
  if (s < 1 || s > eligible)
    throw InvalidConfig("sparsity " + std::to_string(s) + " must lie in [1, " + std::to_string(eligible) +
                        "] (nonzero columns of X)");

  FitResult<Scalar> res;
  const Index r = std::min(config.rank, s);
  res.rank_capped = r < config.rank;
  res.rank = r;
  res.sparsity = s;

  ActiveSet A;
  if (!config.initial_active.empty()) {
    A = config.initial_active;
    detail::check_support(A, p);
    if (static_cast<Index>(A.size()) != s) throw InvalidConfig("initial active set size differs from sparsity");
    for (Index j : A)
      if (zero_cols[static_cast<std::size_t>(j)]) throw InvalidConfig("initial active set contains a zero column");
  } else {
    const auto init = init_active_set(X, Y, r, s);
    A = init.active;
  }

  std::map<ActiveSet, std::size_t> visited{{A, 0}};
  std::vector<ActiveSet> sets{A};
  std::vector<double> losses;
  Matrix<Scalar> C_prev = Matrix<Scalar>::Zero(p, q);
  detail::Iterate<Scalar> cur;
  ActiveSet cur_set;
  res.trace.status = Termination::max_iter;

  for (int k = 0; k < config.max_iter; ++k) {
    cur = detail::step(X, Y, A, r, config.gram_policy);
    cur_set = A;
    res.rank_deficient = res.rank_deficient || cur.rank_deficient;
    losses.push_back(cur.loss);
    const double change = static_cast<double>((cur.C - C_prev).norm());
    res.trace.records.push_back({hash_active_set(A), change, cur.loss});

    detail::exclude(cur.delta, zero_cols);
    ActiveSet next = select_active(cur.delta, s);

    if (change <= config.tol) {
      res.trace.status = Termination::tol_converged;
      break;
    }
    if (next == A) {
      res.trace.status = Termination::active_set_fixed_point;
      break;
    }
    if (auto hit = visited.find(next); hit != visited.end()) {
      res.trace.status = Termination::cycle_detected;
      std::size_t best = hit->second;
      for (std::size_t m = hit->second; m < losses.size(); ++m)
        if (losses[m] < losses[best]) best = m;
      if (best + 1 != losses.size()) {
        cur_set = sets[best];
        cur = detail::step(X, Y, cur_set, r, config.gram_policy);
      }
      break;
    }
    visited.emplace(next, sets.size());
    sets.push_back(next);
    C_prev = cur.C;
    A = std::move(next);
  }

  res.C = std::move(cur.C);
  res.B = std::move(cur.B);
  res.V = std::move(cur.V);
  res.active_set = cur_set;
  res.loss = cur.loss;
  res.iterations = static_cast<int>(res.trace.records.size());
  res.converged = res.trace.status == Termination::tol_converged ||
                  res.trace.status == Termination::active_set_fixed_point;
  res.cycled = res.trace.status == Termination::cycle_detected;
  res.gic = p >= 2 ? gic(res.loss, n, p, q, s, r) : std::numeric_limits<double>::quiet_NaN();
  return res;
}

template <typename Scalar>
FitResult<Scalar> solve_fixed(const Dataset<Scalar>& data, const SolverConfig& config) {
  return solve_fixed(data.X, data.Y, config);
}

}  // namespace mrbess
