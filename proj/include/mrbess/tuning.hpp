#pragma once

// Selection of (sparsity, rank): two-stage GIC search, exhaustive GIC grid,
// and a held-out validation split.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "mrbess/gic.hpp"
#include "mrbess/model.hpp"
#include "mrbess/solver.hpp"
#include "mrbess/types.hpp"

namespace mrbess {

enum class TuneMode { gic, grid, validation };

inline const char* to_string(TuneMode m) {
  switch (m) {
    case TuneMode::gic: return "gic";
    case TuneMode::grid: return "grid";
    case TuneMode::validation: return "cv";
  }
  return "unknown";
}

/// One evaluated (s, r) cell. Failed cells carry gic = +inf.
/// penalty = gic_penalty(n, p, q, s, r_penalty); r_penalty is the fitted rank,
/// except in the sparsity sweep where every cell is charged for r_max.
struct GicRecord {
  Index s = 0;
  Index r_nominal = 0;
  Index r_effective = 0;
  Index r_penalty = 0;
  double loss = 0;
  double penalty = 0;
  double gic = std::numeric_limits<double>::infinity();
  int iterations = 0;
  Termination status = Termination::max_iter;
  bool failed = false;
  std::string error;
};

struct ValidationRecord {
  Index s = 0;
  Index r = 0;
  double val_error = std::numeric_limits<double>::infinity();
  int iterations = 0;
  Termination status = Termination::max_iter;
  bool failed = false;
  std::string error;
};

template <typename Scalar>
struct TuneReport {
  TuneMode mode = TuneMode::gic;
  std::vector<GicRecord> stage1;  // s sweep at r_max
  std::vector<GicRecord> stage2;  // r sweep at s_hat
  std::vector<GicRecord> grid;    // exhaustive sweep
  std::vector<ValidationRecord> validation;
  std::vector<Index> train_rows;
  Index s_hat = 0;
  Index r_hat = 0;
  FitResult<Scalar> fit;
  /// Number of fixed-(s, r) solves performed, the final one included.
  int solves = 0;
};

namespace detail {

template <typename Scalar>
GicRecord evaluate_gic_cell(const Dataset<Scalar>& data, Index s, Index r, const SolverConfig& base,
                            std::optional<FitResult<Scalar>>& fit_out, Index r_penalty = -1) {
  GicRecord rec;
  rec.s = s;
  rec.r_nominal = r;
  rec.r_effective = std::min(r, s);
  rec.r_penalty = r_penalty < 0 ? rec.r_effective : r_penalty;
  SolverConfig cfg = base;
  cfg.sparsity = s;
  cfg.rank = r;
  cfg.initial_active.clear();
  try {
    auto fit = solve_fixed(data, cfg);
    rec.r_effective = fit.rank;
    rec.r_penalty = r_penalty < 0 ? rec.r_effective : r_penalty;
    rec.loss = fit.loss;
    rec.penalty = gic_penalty(data.n(), data.p(), data.q(), s, rec.r_penalty);
    rec.gic = rec.loss + rec.penalty;
    rec.iterations = fit.iterations;
    rec.status = fit.trace.status;
    fit.gic = rec.gic;
    fit_out = std::move(fit);
  } catch (const Error& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.gic = std::numeric_limits<double>::infinity();
    fit_out.reset();
  }
  return rec;
}

inline void check_tuning_bounds(Index n, Index p, Index q, Index s_max, Index r_max) {
  if (s_max < 1 || s_max > p)
    throw InvalidConfig("s_max " + std::to_string(s_max) + " must lie in [1, p = " + std::to_string(p) + "]");
  if (r_max < 1 || r_max > std::min(n, q))
    throw InvalidConfig("r_max " + std::to_string(r_max) + " must lie in [1, min(n, q) = " +
                        std::to_string(std::min(n, q)) + "]");
}

}  // namespace detail

/// Two-stage search. Sparsity sweep: s = 1..s_max fitted at rank min(r_max, s) and
/// scored as GIC with rank r_max. Rank sweep: r = 1..r_max at the chosen s, scored
/// with the fitted rank. Ties go to the smaller value.
template <typename Scalar>
TuneReport<Scalar> tune_gic(const Dataset<Scalar>& data, Index s_max, Index r_max, const SolverConfig& config = {}) {
  detail::check_tuning_bounds(data.n(), data.p(), data.q(), s_max, r_max);
  TuneReport<Scalar> rep;
  rep.mode = TuneMode::gic;

  double best = std::numeric_limits<double>::infinity();
  for (Index s = 1; s <= s_max; ++s) {
    std::optional<FitResult<Scalar>> fit;
    rep.stage1.push_back(detail::evaluate_gic_cell(data, s, std::min(r_max, s), config, fit, r_max));
    ++rep.solves;
    if (rep.stage1.back().gic < best) {
      best = rep.stage1.back().gic;
      rep.s_hat = s;
    }
  }
  if (rep.s_hat == 0) throw Error("tune_gic: every sparsity level failed: " + rep.stage1.front().error);

  best = std::numeric_limits<double>::infinity();
  std::optional<FitResult<Scalar>> chosen;
  for (Index r = 1; r <= r_max; ++r) {
    std::optional<FitResult<Scalar>> fit;
    rep.stage2.push_back(detail::evaluate_gic_cell(data, rep.s_hat, r, config, fit));
    ++rep.solves;
    if (rep.stage2.back().gic < best) {
      best = rep.stage2.back().gic;
      rep.r_hat = r;
      chosen = std::move(fit);
    }
  }
  if (!chosen) throw Error("tune_gic: every rank failed at s = " + std::to_string(rep.s_hat));
  // The final run with (r_hat, s_hat) is deterministic and equals the stage-2 cell.
  rep.fit = std::move(*chosen);
  rep.fit.gic = rep.stage2[static_cast<std::size_t>(rep.r_hat - 1)].gic;
  ++rep.solves;
  return rep;
}

/// Exhaustive GIC minimization over s = 1..s_max, r = 1..min(r_max, s).
template <typename Scalar>
TuneReport<Scalar> tune_grid_gic(const Dataset<Scalar>& data, Index s_max, Index r_max,
                                 const SolverConfig& config = {}) {
  detail::check_tuning_bounds(data.n(), data.p(), data.q(), s_max, r_max);
  TuneReport<Scalar> rep;
  rep.mode = TuneMode::grid;
  double best = std::numeric_limits<double>::infinity();
  std::optional<FitResult<Scalar>> chosen;
  for (Index s = 1; s <= s_max; ++s) {
    for (Index r = 1; r <= std::min(r_max, s); ++r) {
      std::optional<FitResult<Scalar>> fit;
      rep.grid.push_back(detail::evaluate_gic_cell(data, s, r, config, fit));
      ++rep.solves;
      if (rep.grid.back().gic < best) {
        best = rep.grid.back().gic;
        rep.s_hat = s;
        rep.r_hat = r;
        chosen = std::move(fit);
      }
    }
  }
  if (!chosen) throw Error("tune_grid_gic: every grid cell failed");
  rep.fit = std::move(*chosen);
  ++rep.solves;
  return rep;
}

/// Seeded uniform row split: returns (training rows, validation rows), each sorted.
inline std::pair<std::vector<Index>, std::vector<Index>> split_rows(Index n, double train_fraction,
                                                                    std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidConfig("train fraction must lie in (0, 1)");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_train = static_cast<Index>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<Index> train(perm.begin(), perm.begin() + n_train);
  std::vector<Index> val(perm.begin() + n_train, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {std::move(train), std::move(val)};
}

/// Picks (s, r) by held-out prediction error over the full grid, then refits on all rows.
template <typename Scalar>
TuneReport<Scalar> tune_validation(const Dataset<Scalar>& data, Index s_max, Index r_max, double train_fraction,
                                   std::uint64_t seed, const SolverConfig& config = {}) {
  detail::check_tuning_bounds(data.n(), data.p(), data.q(), s_max, r_max);
  auto [train, val] = split_rows(data.n(), train_fraction, seed);
  const auto n_train = static_cast<Index>(train.size());
  if (n_train < s_max || n_train < 3 || val.empty())
    throw InvalidConfig("infeasible split: " + std::to_string(n_train) + " training rows and " +
                        std::to_string(val.size()) + " validation rows for s_max = " + std::to_string(s_max));

  const Matrix<Scalar> Xt = select_rows(data.X, train), Yt = select_rows(data.Y, train);
  const Matrix<Scalar> Xv = select_rows(data.X, val), Yv = select_rows(data.Y, val);

  TuneReport<Scalar> rep;
  rep.mode = TuneMode::validation;
  rep.train_rows = train;
  double best = std::numeric_limits<double>::infinity();
  for (Index s = 1; s <= s_max; ++s) {
    for (Index r = 1; r <= std::min(r_max, s); ++r) {
      ValidationRecord rec;
      rec.s = s;
      rec.r = r;
      SolverConfig cfg = config;
      cfg.sparsity = s;
      cfg.rank = r;
      cfg.initial_active.clear();
      try {
        const auto fit = solve_fixed(Xt, Yt, cfg);
        rec.val_error = static_cast<double>((Yv - Xv * fit.C).squaredNorm()) /
                        static_cast<double>(Yv.rows() * Yv.cols());
        rec.iterations = fit.iterations;
        rec.status = fit.trace.status;
      } catch (const Error& e) {
        rec.failed = true;
        rec.error = e.what();
      }
      ++rep.solves;
      if (rec.val_error < best) {
        best = rec.val_error;
        rep.s_hat = s;
        rep.r_hat = r;
      }
      rep.validation.push_back(std::move(rec));
    }
  }
  if (rep.s_hat == 0) throw Error("tune_validation: every grid cell failed");

  SolverConfig cfg = config;
  cfg.sparsity = rep.s_hat;
  cfg.rank = rep.r_hat;
  cfg.initial_active.clear();
  rep.fit = solve_fixed(data, cfg);
  ++rep.solves;
  return rep;
}

}  // namespace mrbess
