#include "mrbess/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "mrbess/model.hpp"
#include "mrbess/solver.hpp"

namespace mrbess::sim {

namespace {

enum Stream : std::uint64_t { kCoefficient = 1, kDesign = 2, kNoise = 3 };

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

MatrixXd standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd m(rows, cols);
  // Fill row by row so the stream order does not depend on storage order.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = z(rng);
  return m;
}

/// Rows i.i.d. N(0, cov): Z L^T with cov = L L^T.
MatrixXd correlated_rows(const MatrixXd& cov, Index rows, std::mt19937_64& rng) {
  MatrixXd Z = standard_normal(rows, cov.rows(), rng);
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw InvalidConfig("covariance is not positive definite");
  return Z * llt.matrixL().transpose();
}

}  // namespace

const char* to_string(NoiseKind k) { return k == NoiseKind::ar ? "AR" : "SC"; }

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "ar" || s == "AR") return NoiseKind::ar;
  if (s == "sc" || s == "SC") return NoiseKind::sc;
  throw InvalidConfig("unknown noise kind '" + s + "' (expected ar or sc)");
}

void SimulationSpec::validate() const {
  std::vector<std::string> bad;
  if (n < 3) bad.push_back("n must be >= 3");
  if (p < 1) bad.push_back("p must be >= 1");
  if (q < 1) bad.push_back("q must be >= 1");
  if (r_star < 1) bad.push_back("r_star must be >= 1");
  if (s_star < r_star) bad.push_back("s_star must be >= r_star");
  if (s_star > p) bad.push_back("s_star must be <= p");
  if (r_star > q) bad.push_back("r_star must be <= q");
  if (r_star > n) bad.push_back("r_star must be <= n");
  if (!(snr > 0) || !std::isfinite(snr)) bad.push_back("snr must be positive and finite");
  if (!(step > 0)) bad.push_back("step must be positive so the weights increase");
  if (!(d0 + step > 0)) bad.push_back("weights must be positive");
  if (!(std::abs(design_rho) < 1)) bad.push_back("design_rho must lie in (-1, 1)");
  if (noise_kind == NoiseKind::ar && !(std::abs(noise_rho) < 1)) bad.push_back("noise_rho must lie in (-1, 1)");
  if (noise_kind == NoiseKind::sc && !(noise_rho > -1.0 / static_cast<double>(std::max<Index>(q - 1, 1)) && noise_rho < 1))
    bad.push_back("noise_rho out of range for compound symmetry");
  if (replications < 1) bad.push_back("replications must be >= 1");
  if (bad.empty()) return;
  std::string msg = "invalid simulation spec: ";
  for (std::size_t i = 0; i < bad.size(); ++i) msg += (i ? "; " : "") + bad[i];
  throw InvalidConfig(msg);
}

MatrixXd ar_covariance(Index dim, double rho) {
  MatrixXd c(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) c(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return c;
}

MatrixXd sc_covariance(Index dim, double rho) {
  MatrixXd c = MatrixXd::Constant(dim, dim, rho);
  c.diagonal().setOnes();
  return c;
}

CoefficientTruth gen_coefficient(const SimulationSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto rng = make_rng(seed, kCoefficient);
  MatrixXd A = standard_normal(spec.q, spec.r_star, rng);

  std::uniform_real_distribution<double> mag(0.3, 1.0);
  std::bernoulli_distribution neg(0.5);
  MatrixXd B = MatrixXd::Zero(spec.p, spec.r_star);
  for (Index i = 0; i < spec.s_star; ++i)
    for (Index k = 0; k < spec.r_star; ++k) {
      const double m = mag(rng);
      B(i, k) = neg(rng) ? -m : m;
    }
  A.colwise().normalize();
  B.colwise().normalize();

  CoefficientTruth t;
  t.weights.resize(spec.r_star);
  for (Index k = 0; k < spec.r_star; ++k) t.weights(k) = spec.d0 + spec.step * static_cast<double>(k + 1);
  t.C_star = B * t.weights.asDiagonal() * A.transpose();
  t.support.resize(static_cast<std::size_t>(spec.s_star));
  for (Index i = 0; i < spec.s_star; ++i) t.support[static_cast<std::size_t>(i)] = i;
  return t;
}

MatrixXd gen_design(const SimulationSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto rng = make_rng(seed, kDesign);
  if (spec.design_rho == 0.0) return standard_normal(spec.n, spec.p, rng);
  return correlated_rows(ar_covariance(spec.p, spec.design_rho), spec.n, rng);
}

NoiseDraw gen_noise_with_snr(const MatrixXd& XC_star, const SimulationSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (XC_star.cols() != spec.q) throw InvalidInput("signal has the wrong number of columns");
  Eigen::BDCSVD<MatrixXd> svd(XC_star);
  const auto& sv = svd.singularValues();
  if (sv.size() < spec.r_star) throw InvalidInput("signal has fewer singular values than r_star");
  const double eta = sv(spec.r_star - 1);
  if (!(eta > 0)) throw InvalidInput("signal has no r_star-th singular value above zero");

  const MatrixXd cov = spec.noise_kind == NoiseKind::ar ? ar_covariance(spec.q, spec.noise_rho)
                                                        : sc_covariance(spec.q, spec.noise_rho);
  for (std::uint64_t bump = 0;; ++bump) {
    auto rng = make_rng(seed + bump, kNoise);
    MatrixXd raw = correlated_rows(cov, XC_star.rows(), rng);
    const double nrm = raw.norm();
    if (!(nrm > 0)) continue;
    const double c = eta / (spec.snr * nrm);
    NoiseDraw d;
    d.E = c * raw;
    d.omega = c * c;
    d.realized_snr = eta / d.E.norm();
    return d;
  }
}

Replication generate_replication(const SimulationSpec& spec, std::uint64_t seed) {
  Replication r;
  r.truth = gen_coefficient(spec, seed);
  r.X = gen_design(spec, seed);
  const MatrixXd signal = r.X * r.truth.C_star;
  r.noise = gen_noise_with_snr(signal, spec, seed);
  r.Y = signal + r.noise.E;
  return r;
}

std::string TunerSpec::name() const {
  switch (kind) {
    case Kind::fixed: return "MrBeSS-fixed-r" + std::to_string(rank) + "-s" + std::to_string(sparsity);
    case Kind::gic: return "MrBeSS";
    case Kind::grid: return "MrBeSS-grid";
    case Kind::validation: return "MrBeSS-V";
  }
  return "unknown";
}

TunerSpec TunerSpec::fixed(Index rank, Index sparsity) {
  TunerSpec t;
  t.kind = Kind::fixed;
  t.rank = rank;
  t.sparsity = sparsity;
  return t;
}

TunerSpec TunerSpec::gic(Index s_max, Index r_max) {
  TunerSpec t;
  t.kind = Kind::gic;
  t.s_max = s_max;
  t.r_max = r_max;
  return t;
}

TunerSpec TunerSpec::grid(Index s_max, Index r_max) {
  TunerSpec t = gic(s_max, r_max);
  t.kind = Kind::grid;
  return t;
}

TunerSpec TunerSpec::validation(Index s_max, Index r_max, double train_fraction) {
  TunerSpec t = gic(s_max, r_max);
  t.kind = Kind::validation;
  t.train_fraction = train_fraction;
  return t;
}

namespace {

void collect_calls(const TuneReport<double>& rep, std::vector<SolverCall>& out) {
  for (const auto* recs : {&rep.stage1, &rep.stage2, &rep.grid})
    for (const auto& g : *recs)
      if (!g.failed) out.push_back({g.status, g.iterations});
  for (const auto& v : rep.validation)
    if (!v.failed) out.push_back({v.status, v.iterations});
  out.push_back({rep.fit.trace.status, rep.fit.iterations});
}

}  // namespace

TunerRun run_tuner(const TunerSpec& tuner, const MatrixXd& X, const MatrixXd& Y, std::uint64_t seed,
                   const SolverConfig& base) {
  const auto data = validate_and_normalize(X, Y);
  TunerRun run;
  switch (tuner.kind) {
    case TunerSpec::Kind::fixed: {
      SolverConfig cfg = base;
      cfg.rank = tuner.rank;
      cfg.sparsity = tuner.sparsity;
      run.fit = solve_fixed(data, cfg);
      run.calls.push_back({run.fit.trace.status, run.fit.iterations});
      run.s_hat = run.fit.sparsity;
      run.r_hat = run.fit.rank;
      break;
    }
    case TunerSpec::Kind::gic:
    case TunerSpec::Kind::grid:
    case TunerSpec::Kind::validation: {
      const Index r_max = std::min({tuner.r_max, data.n(), data.q()});
      const Index s_max = std::min(tuner.s_max, data.p());
      TuneReport<double> rep =
          tuner.kind == TunerSpec::Kind::gic    ? tune_gic(data, s_max, r_max, base)
          : tuner.kind == TunerSpec::Kind::grid ? tune_grid_gic(data, s_max, r_max, base)
                                                : tune_validation(data, s_max, r_max, tuner.train_fraction, seed, base);
      collect_calls(rep, run.calls);
      run.s_hat = rep.s_hat;
      run.r_hat = rep.r_hat;
      run.fit = std::move(rep.fit);
      break;
    }
  }
  run.C = denormalize_coefficients(run.fit.C, data.col_scales);
  return run;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  // Kahan-compensated mean, then compensated sum of squared deviations.
  double sum = 0, comp = 0;
  for (double v : values) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double ss = 0;
  comp = 0;
  for (double v : values) {
    const double y = (v - s.mean) * (v - s.mean) - comp;
    const double t = ss + y;
    comp = (t - ss) - y;
    ss = t;
  }
  s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

namespace {

ReplicationOutcome run_replication(const SimulationSpec& spec, const std::vector<TunerSpec>& tuners,
                                   std::uint64_t seed, const SolverConfig& base) {
  ReplicationOutcome out;
  out.seed = seed;
  const Replication rep = generate_replication(spec, seed);
  int failures = 0;
  for (const auto& tuner : tuners) {
    MethodOutcome m;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      TunerRun run = run_tuner(tuner, rep.X, rep.Y, seed, base);
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      m.metrics = compute_metrics(run.C, rep.truth.C_star, rep.X, elapsed);
      m.s_hat = run.s_hat;
      m.r_hat = run.r_hat;
      m.active_set = run.fit.active_set;
      m.calls = std::move(run.calls);
    } catch (const Error& e) {
      m.failed = true;
      m.error = e.what();
      ++failures;
    }
    out.methods.push_back(std::move(m));
  }
  out.failed = !tuners.empty() && failures == static_cast<int>(tuners.size());
  return out;
}

}  // namespace

BenchmarkTable run_benchmark(const SimulationSpec& spec, const std::vector<TunerSpec>& tuners, unsigned threads,
                             const SolverConfig& base) {
  spec.validate();
  if (tuners.empty()) throw InvalidConfig("run_benchmark needs at least one tuner");
  BenchmarkTable table;
  table.spec = spec;
  table.replications.resize(static_cast<std::size_t>(spec.replications));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < spec.replications; i = next++)
      table.replications[static_cast<std::size_t>(i)] =
          run_replication(spec, tuners, spec.base_seed + static_cast<std::uint64_t>(i) + 1, base);
  };
  threads = std::max(1u, std::min(threads, static_cast<unsigned>(spec.replications)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const auto& r : table.replications)
    if (r.failed) ++table.failed_replications;

  for (std::size_t k = 0; k < tuners.size(); ++k) {
    BenchmarkRow row;
    row.method = tuners[k].name();
    row.p = spec.p;
    std::vector<double> erc, erxc, fpr, fnr, t, rank;
    for (const auto& r : table.replications) {
      const auto& m = r.methods[k];
      if (r.failed || m.failed) {
        ++row.failed;
        continue;
      }
      erc.push_back(m.metrics.er_c * 1000.0);
      erxc.push_back(m.metrics.er_xc * 10.0);
      fpr.push_back(m.metrics.fpr * 100.0);
      fnr.push_back(m.metrics.fnr * 100.0);
      t.push_back(m.metrics.wall_time_s);
      rank.push_back(static_cast<double>(m.metrics.est_rank));
    }
    row.replications = static_cast<int>(erc.size());
    row.er_c_x1000 = summarize(erc);
    row.er_xc_x10 = summarize(erxc);
    row.fpr_pct = summarize(fpr);
    row.fnr_pct = summarize(fnr);
    row.time_s = summarize(t);
    row.rank = summarize(rank);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace mrbess::sim
