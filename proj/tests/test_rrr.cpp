#include "doctest.h"
#include "mrbess/rrr.hpp"
#include "support.hpp"

using namespace mrbess;
using testing::gaussian;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// The library's sign rule, applied independently to an oracle basis.
MatrixXd canonical_signs(MatrixXd V) {
  for (Index c = 0; c < V.cols(); ++c) {
    Index best = 0;
    for (Index i = 1; i < V.rows(); ++i)
      if (std::abs(V(i, c)) > std::abs(V(best, c))) best = i;
    if (V(best, c) < 0) V.col(c) *= -1.0;
  }
  return V;
}

MatrixXd random_orthogonal(Index k, std::mt19937_64& rng) {
  Eigen::HouseholderQR<MatrixXd> qr(gaussian(k, k, rng));
  return qr.householderQ() * MatrixXd::Identity(k, k);
}

}  // namespace

TEST_CASE("gram inverse: orthogonal design gives I/n") {
  std::mt19937_64 rng(1);
  const MatrixXd X = testing::orthogonal_design(40, 6, rng);
  const MatrixXd G = restricted_gram_inverse(X, {0, 2, 5}, GramPolicy::error_on_singular);
  CHECK(testing::max_abs_diff(G, MatrixXd::Identity(3, 3) / 40.0) < 1e-14);
}

TEST_CASE("gram inverse: single column of norm sqrt(n)") {
  std::mt19937_64 rng(2);
  const MatrixXd X = testing::normalized_gaussian(25, 4, rng);
  const MatrixXd G = restricted_gram_inverse(X, {3}, GramPolicy::error_on_singular);
  REQUIRE(G.rows() == 1);
  CHECK(G(0, 0) == doctest::Approx(1.0 / 25.0).epsilon(1e-13));
}

TEST_CASE("gram inverse: random well-conditioned five-column support") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd X = gaussian(50, 9, rng);
    const ActiveSet A = testing::random_subset(9, 5, rng);
    const MatrixXd XA = testing::columns(X, A);
    const MatrixXd G = restricted_gram_inverse(X, A, GramPolicy::error_on_singular);
    CHECK(testing::max_abs_diff(G * (XA.transpose() * XA), MatrixXd::Identity(5, 5)) < 1e-8);
  }
}

TEST_CASE("gram inverse: singular support") {
  std::mt19937_64 rng(4);
  MatrixXd X = gaussian(20, 4, rng);
  X.col(2) = X.col(0) - 0.5 * X.col(1);
  const ActiveSet A{0, 1, 2};
  try {
    restricted_gram_inverse(X, A, GramPolicy::error_on_singular);
    FAIL("expected SingularGram");
  } catch (const SingularGram& e) {
    CHECK(e.set_size() == 3);
  }
  const MatrixXd XA = testing::columns(X, A);
  const MatrixXd G = XA.transpose() * XA;
  const MatrixXd Gp = restricted_gram_inverse(X, A, GramPolicy::pseudo_inverse);
  // Moore-Penrose conditions, checked against an independent pseudo-inverse.
  CHECK((G * Gp * G - G).norm() < 1e-8 * G.norm());
  CHECK((Gp * G * Gp - Gp).norm() < 1e-8 * Gp.norm());
  const MatrixXd Gp_ref = G.completeOrthogonalDecomposition().pseudoInverse();
  CHECK((Gp - Gp_ref).norm() < 1e-8 * Gp_ref.norm());
  CHECK_THROWS_AS(restricted_gram_inverse(X, {}, GramPolicy::error_on_singular), InvalidInput);
}

TEST_CASE("right factors: exact rank-one signal") {
  std::mt19937_64 rng(5);
  const MatrixXd X = gaussian(30, 6, rng);
  const ActiveSet A{1, 3, 4};
  const MatrixXd XA = testing::columns(X, A);
  const MatrixXd G = gaussian(3, 1, rng) * gaussian(1, 5, rng);
  const MatrixXd Y = XA * G;
  const auto rf = top_r_right_factors(X, Y, A, 1);
  Eigen::JacobiSVD<MatrixXd> svd(XA * G, Eigen::ComputeThinV);
  CHECK(std::abs(std::abs(rf.V.col(0).dot(svd.matrixV().col(0))) - 1.0) < 1e-10);
  REQUIRE(rf.eigenvalues.size() >= 2);
  CHECK(rf.eigenvalues(1) <= 1e-8 * rf.eigenvalues(0));
  CHECK_FALSE(rf.rank_deficient);
}

TEST_CASE("right factors: full support on an orthogonal design spans R^q") {
  std::mt19937_64 rng(6);
  const MatrixXd X = testing::orthogonal_design(30, 5, rng);
  const MatrixXd Y = gaussian(30, 4, rng);
  const auto rf = top_r_right_factors(X, Y, {0, 1, 2, 3, 4}, 4);
  CHECK(testing::max_abs_diff(rf.V.transpose() * rf.V, MatrixXd::Identity(4, 4)) < 1e-10);
  CHECK(testing::max_abs_diff(rf.V * rf.V.transpose(), MatrixXd::Identity(4, 4)) < 1e-10);
}

TEST_CASE("right factors: dense eigendecomposition oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const MatrixXd X = gaussian(20, 7, rng);
    const MatrixXd Y = gaussian(20, 6, rng);
    const ActiveSet A = testing::random_subset(7, 4, rng);
    const auto ref = testing::reference_rrr(X, Y, A, 2);
    const auto rf = top_r_right_factors(X, Y, A, 2);
    CHECK(testing::max_abs_diff(rf.V, canonical_signs(ref.V)) < 1e-8);
    for (Index j = 0; j < 2; ++j)
      CHECK(std::abs(rf.eigenvalues(j) - ref.eigenvalues(j)) < 1e-9 * ref.eigenvalues(0));
  }
}

TEST_CASE("right factors: factor and Gram routes agree") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const MatrixXd X = gaussian(40, 10, rng);
    const MatrixXd Y = gaussian(40, 8, rng);
    const ActiveSet A = testing::random_subset(10, 3 + trial % 5, rng);
    const Index r = 1 + trial % 3;
    const auto a = top_r_right_factors(X, Y, A, r, GramPolicy::error_on_singular, EigenRoute::factor);
    const auto b = top_r_right_factors(X, Y, A, r, GramPolicy::error_on_singular, EigenRoute::gram);
    CHECK(testing::max_abs_diff(a.V, b.V) < 1e-7);
    for (Index j = 0; j < r; ++j) CHECK(std::abs(a.eigenvalues(j) - b.eigenvalues(j)) < 1e-7 * b.eigenvalues(0));
  }
}

TEST_CASE("right factors: sign convention and orthonormality") {
  std::mt19937_64 rng(9);
  const MatrixXd X = gaussian(25, 6, rng);
  const MatrixXd Y = gaussian(25, 5, rng);
  const auto rf = top_r_right_factors(X, Y, {0, 1, 2, 3, 4}, 3);
  CHECK(testing::max_abs_diff(rf.V.transpose() * rf.V, MatrixXd::Identity(3, 3)) < 1e-8);
  for (Index c = 0; c < 3; ++c) {
    Index arg = 0;
    rf.V.col(c).cwiseAbs().maxCoeff(&arg);
    CHECK(rf.V(arg, c) > 0);
  }
}

TEST_CASE("right factors: rank-deficient signal is completed deterministically") {
  std::mt19937_64 rng(10);
  const MatrixXd X = gaussian(20, 5, rng);
  // Y has rank one, so only one eigenvalue of Y^T P_A Y is positive.
  const MatrixXd Y = gaussian(20, 1, rng) * gaussian(1, 4, rng);
  const auto a = top_r_right_factors(X, Y, {0, 1, 2}, 3);
  const auto b = top_r_right_factors(X, Y, {0, 1, 2}, 3);
  CHECK(a.rank_deficient);
  CHECK(testing::max_abs_diff(a.V.transpose() * a.V, MatrixXd::Identity(3, 3)) < 1e-10);
  CHECK(a.V == b.V);
  // The completion lives in the null space of Y^T P_A Y.
  const MatrixXd P = testing::projector(X, {0, 1, 2});
  const MatrixXd S = Y.transpose() * P * Y;
  CHECK((S * a.V.rightCols(2)).norm() < 1e-8 * S.norm());
}

TEST_CASE("right factors: rank bounds") {
  std::mt19937_64 rng(11);
  const MatrixXd X = gaussian(20, 5, rng);
  const MatrixXd Y = gaussian(20, 4, rng);
  CHECK_THROWS_AS(top_r_right_factors(X, Y, {0, 1}, 3), InvalidConfig);
  CHECK_THROWS_AS(top_r_right_factors(X, Y, {0, 1, 2, 3, 4}, 5), InvalidConfig);
  CHECK_THROWS_AS(top_r_right_factors(X, Y, {0, 9}, 1), InvalidInput);
  CHECK_THROWS_AS(top_r_right_factors(X, Y, {2, 1}, 1), InvalidInput);
}

TEST_CASE("restricted fit: full rank equals least squares on the support") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd X = gaussian(30, 8, rng);
    const MatrixXd Y = gaussian(30, 5, rng);
    const ActiveSet A = testing::random_subset(8, 3, rng);
    const auto fit = rrr_restricted_fit(X, Y, A, 3);  // r = min(|A|, q)
    const MatrixXd ls = testing::columns(X, A).colPivHouseholderQr().solve(Y);
    MatrixXd C = MatrixXd::Zero(8, 5);
    for (std::size_t k = 0; k < A.size(); ++k) C.row(A[k]) = ls.row(static_cast<Index>(k));
    CHECK(testing::max_abs_diff(fit.C, C) < 1e-9);
  }
}

TEST_CASE("restricted fit: noiseless oracle recovers C*") {
  std::mt19937_64 rng(13);
  const ActiveSet A_star{1, 4, 6};
  const MatrixXd X = gaussian(40, 8, rng);
  const MatrixXd C_star = testing::low_rank_coefficient(8, 6, A_star, 2, rng);
  const MatrixXd Y = X * C_star;
  const auto fit = rrr_restricted_fit(X, Y, A_star, 2);
  CHECK(testing::max_abs_diff(fit.C, C_star) < 1e-8);
  CHECK(fit.loss < 1e-20);
}

TEST_CASE("restricted fit: loss-trace identity and dense oracle") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 30, p = 9, q = 2 + trial % 6;
    const MatrixXd X = gaussian(n, p, rng);
    const MatrixXd Y = gaussian(n, q, rng);
    const ActiveSet A = testing::random_subset(p, 1 + trial % 6, rng);
    const Index r = std::min<Index>({static_cast<Index>(A.size()), q, 1 + trial % 3});
    const auto fit = rrr_restricted_fit(X, Y, A, r);
    const auto ref = testing::reference_rrr(X, Y, A, r);
    const double direct = (Y - X * fit.C).squaredNorm() / (2.0 * n);
    const double trace_form = Y.squaredNorm() / (2.0 * n) - 0.5 * ref.eigenvalues.head(r).sum() / n;
    CHECK(std::abs(fit.loss - direct) <= 1e-8 * direct);
    CHECK(std::abs(fit.loss - trace_form) <= 1e-8 * std::abs(trace_form));
    CHECK(testing::max_abs_diff(fit.C, ref.C) < 1e-9);
  }
}

TEST_CASE("restricted fit: rotating (B, V) leaves C unchanged") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const Index r = 1 + trial % 4;
    const MatrixXd B = gaussian(12, r, rng);
    Eigen::HouseholderQR<MatrixXd> qr(gaussian(7, r, rng));
    const MatrixXd V = qr.householderQ() * MatrixXd::Identity(7, r);
    const MatrixXd Q = random_orthogonal(r, rng);
    CHECK(testing::max_abs_diff(B * V.transpose(), (B * Q) * (V * Q).transpose()) < 1e-10);
  }
}

TEST_CASE("restricted fit: eigenvalues descend, loss falls with rank, projector idempotent") {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 30; ++trial) {
    const MatrixXd X = gaussian(25, 8, rng);
    const MatrixXd Y = gaussian(25, 6, rng);
    const ActiveSet A = testing::random_subset(8, 5, rng);
    const auto full = rrr_restricted_fit(X, Y, A, 5);
    for (Index j = 0; j + 1 < full.eigenvalues.size(); ++j)
      CHECK(full.eigenvalues(j) >= full.eigenvalues(j + 1) - 1e-10);
    CHECK(full.eigenvalues.minCoeff() >= -1e-10);
    double prev = std::numeric_limits<double>::infinity();
    for (Index r = 1; r <= 5; ++r) {
      const double loss = rrr_restricted_fit(X, Y, A, r).loss;
      CHECK(loss <= prev + 1e-10);
      prev = loss;
    }
    const MatrixXd P = testing::projector(X, A);
    CHECK((P * P - P).norm() <= 1e-8);
  }
}

TEST_CASE("primal-dual update: full support has zero dual") {
  std::mt19937_64 rng(17);
  const MatrixXd X = gaussian(30, 5, rng);
  const MatrixXd Y = gaussian(30, 4, rng);
  const ActiveSet A{0, 1, 2, 3, 4};
  const auto rf = top_r_right_factors(X, Y, A, 2);
  const auto st = primal_dual_update(X, Y, A, rf.V);
  CHECK(st.Gamma.isZero(0.0));
}

TEST_CASE("primal-dual update: orthogonal design decouples the dual") {
  std::mt19937_64 rng(18);
  const MatrixXd X = testing::orthogonal_design(40, 7, rng);
  const MatrixXd Y = gaussian(40, 5, rng);
  const ActiveSet A{1, 5};
  const auto rf = top_r_right_factors(X, Y, A, 2);
  const auto st = primal_dual_update(X, Y, A, rf.V);
  const MatrixXd expected = X.transpose() * Y * rf.V / 40.0;
  for (Index j : {0, 2, 3, 4, 6}) CHECK((st.Gamma.row(j) - expected.row(j)).norm() < 1e-12);
}

TEST_CASE("primal-dual update: complementarity and naive residual formula") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd X = gaussian(30, 10, rng);
    const MatrixXd Y = gaussian(30, 6, rng);
    const ActiveSet A = testing::random_subset(10, 4, rng);
    const auto rf = top_r_right_factors(X, Y, A, 2);
    const auto st = primal_dual_update(X, Y, A, rf.V);
    const MatrixXd XA = testing::columns(X, A);
    const MatrixXd BA = (XA.transpose() * XA).inverse() * XA.transpose() * Y * rf.V;
    MatrixXd B = MatrixXd::Zero(10, 2);
    for (std::size_t k = 0; k < A.size(); ++k) B.row(A[k]) = BA.row(static_cast<Index>(k));
    const MatrixXd Gamma_all = X.transpose() * (Y * rf.V - X * B) / 30.0;
    for (Index j = 0; j < 10; ++j) {
      const bool active = std::binary_search(A.begin(), A.end(), j);
      if (active) {
        CHECK(st.Gamma.row(j).isZero(0.0));
        CHECK((st.B.row(j) - B.row(j)).norm() < 1e-10);
      } else {
        CHECK(st.B.row(j).isZero(0.0));
        CHECK((st.Gamma.row(j) - Gamma_all.row(j)).norm() < 1e-10);
      }
    }
    CHECK(testing::max_abs_diff(st.V.transpose() * st.V, MatrixXd::Identity(2, 2)) < 1e-8);
  }
}

TEST_CASE("sacrifices: row norms of B + Gamma") {
  PrimalDualState<double> zero{MatrixXd::Zero(4, 2), MatrixXd::Zero(4, 2), MatrixXd::Zero(3, 2), {0}};
  CHECK(sacrifices(zero).delta.isZero(0.0));

  PrimalDualState<double> st{MatrixXd::Zero(3, 2), MatrixXd::Zero(3, 2), MatrixXd::Zero(2, 2), {1}};
  st.B.row(1) << 3, 4;
  CHECK(sacrifices(st).delta(1) == 5.0);

  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd X = gaussian(20, 8, rng);
    const MatrixXd Y = gaussian(20, 3, rng);
    const ActiveSet A = testing::random_subset(8, 3, rng);
    const auto state = primal_dual_update(X, Y, A, top_r_right_factors(X, Y, A, 2).V);
    const VectorXd delta = sacrifices(state).delta;
    for (Index j = 0; j < 8; ++j) {
      double ss = 0;
      for (Index c = 0; c < 2; ++c) ss += std::pow(state.B(j, c) + state.Gamma(j, c), 2);
      CHECK(std::abs(delta(j) - std::sqrt(ss)) < 1e-12);
      CHECK(delta(j) >= 0.0);
      const bool active = std::binary_search(A.begin(), A.end(), j);
      CHECK(std::abs(delta(j) - (active ? state.B.row(j).norm() : state.Gamma.row(j).norm())) < 1e-12);
    }
  }
}
