#pragma once

// Synthetic sparse low-rank regression problems and a replication harness
// that scores tuners against the known truth.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrbess/tuning.hpp"
#include "mrbess/types.hpp"

namespace mrbess::sim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class NoiseKind { ar, sc };

const char* to_string(NoiseKind k);
NoiseKind parse_noise_kind(const std::string& s);

struct SimulationSpec {
  Index n = 100;
  Index p = 200;
  Index q = 100;
  Index s_star = 10;
  Index r_star = 3;
  double d0 = 5.0;
  double step = 5.0;        // d_k = d0 + step * k, k = 1..r_star
  double design_rho = 0.5;  // DesignCov(i, j) = design_rho^|i - j|
  NoiseKind noise_kind = NoiseKind::ar;
  double noise_rho = 0.3;
  double snr = 0.5;
  int replications = 20;
  std::uint64_t base_seed = 1;

  /// Throws InvalidConfig listing every violated constraint.
  void validate() const;
};

struct CoefficientTruth {
  MatrixXd C_star;     // p x q
  ActiveSet support;   // rows 0..s_star-1
  VectorXd weights;    // diagonal of D
};

struct NoiseDraw {
  MatrixXd E;
  double omega = 0;  // variance multiplier applied to the raw draw
  double realized_snr = 0;
};

struct Replication {
  MatrixXd X;
  MatrixXd Y;
  CoefficientTruth truth;
  NoiseDraw noise;
};

/// AR(rho) covariance: rho^|i-j|.
MatrixXd ar_covariance(Index dim, double rho);
/// Compound symmetry: 1 on the diagonal, rho elsewhere.
MatrixXd sc_covariance(Index dim, double rho);

CoefficientTruth gen_coefficient(const SimulationSpec& spec, std::uint64_t seed);
MatrixXd gen_design(const SimulationSpec& spec, std::uint64_t seed);
/// Noise scaled so that sigma_{r*}(XC*) / ||E||_F equals spec.snr.
NoiseDraw gen_noise_with_snr(const MatrixXd& XC_star, const SimulationSpec& spec, std::uint64_t seed);
/// C*, X and E for one replication, each from its own stream derived from `seed`.
Replication generate_replication(const SimulationSpec& spec, std::uint64_t seed);

struct TunerSpec {
  enum class Kind { fixed, gic, grid, validation };
  Kind kind = Kind::gic;
  Index rank = 3;       // fixed
  Index sparsity = 10;  // fixed
  Index s_max = 20;
  Index r_max = 10;
  double train_fraction = 0.8;

  std::string name() const;
  static TunerSpec fixed(Index rank, Index sparsity);
  static TunerSpec gic(Index s_max, Index r_max);
  static TunerSpec grid(Index s_max, Index r_max);
  static TunerSpec validation(Index s_max, Index r_max, double train_fraction = 0.8);
};

struct SolverCall {
  Termination status = Termination::max_iter;
  int iterations = 0;
};

/// Fit on the normalized data, with coefficients mapped back to the raw scale.
struct TunerRun {
  MatrixXd C;  // raw column scale
  FitResult<double> fit;
  std::vector<SolverCall> calls;
  Index s_hat = 0;
  Index r_hat = 0;
};

TunerRun run_tuner(const TunerSpec& tuner, const MatrixXd& X, const MatrixXd& Y, std::uint64_t seed,
                   const SolverConfig& base = {});

struct MethodOutcome {
  bool failed = false;
  std::string error;
  MetricsRecord metrics;
  Index s_hat = 0;
  Index r_hat = 0;
  ActiveSet active_set;  // 0-based
  std::vector<SolverCall> calls;
};

struct ReplicationOutcome {
  std::uint64_t seed = 0;
  std::vector<MethodOutcome> methods;  // parallel to the tuner list
  bool failed = false;                 // every tuner failed
};

struct Summary {
  double mean = 0;
  double sd = 0;
};

struct BenchmarkRow {
  std::string method;
  Index p = 0;
  int replications = 0;  // contributing to the aggregates
  int failed = 0;
  Summary er_c_x1000;
  Summary er_xc_x10;
  Summary fpr_pct;
  Summary fnr_pct;
  Summary time_s;
  Summary rank;
};

struct BenchmarkTable {
  SimulationSpec spec;
  std::vector<BenchmarkRow> rows;  // one per tuner
  std::vector<ReplicationOutcome> replications;
  int failed_replications = 0;
};

/// Sample mean and standard deviation (n - 1 denominator; 0 for a single value),
/// accumulated in index order with compensated summation.
Summary summarize(const std::vector<double>& values);

/// Runs spec.replications replications with seeds base_seed + 1, base_seed + 2, ...
/// Results do not depend on `threads`.
BenchmarkTable run_benchmark(const SimulationSpec& spec, const std::vector<TunerSpec>& tuners, unsigned threads = 1,
                             const SolverConfig& base = {});

}  // namespace mrbess::sim
