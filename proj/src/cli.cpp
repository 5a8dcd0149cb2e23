#include "mrbess/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "mrbess/io.hpp"
#include "mrbess/model.hpp"
#include "mrbess/simulation.hpp"
#include "mrbess/solver.hpp"
#include "mrbess/tuning.hpp"

namespace mrbess::cli {

namespace {

using io::json;

struct Parser {
  CLI::App app{"Sparse reduced-rank regression by best-subset selection", "mrbess"};
  RunConfig cfg;
  CLI::App* fit = nullptr;
  CLI::App* tune = nullptr;
  CLI::App* simulate = nullptr;
  CLI::App* bench = nullptr;

  Parser() {
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    fit = app.add_subcommand("fit", "Fixed rank and sparsity fit on CSV data");
    tune = app.add_subcommand("tune", "Select sparsity and rank (GIC two-stage, full GIC grid, or validation split)");
    simulate = app.add_subcommand("simulate", "Generate one synthetic replication, tune on it and score against the truth");
    bench = app.add_subcommand("bench", "Replicated synthetic benchmark; emits a per-method summary table");
    for (auto* s : {fit, tune, simulate, bench}) s->option_defaults()->always_capture_default();

    for (auto* s : {fit, tune}) {
      s->add_option("--x", cfg.x_path, "Design matrix CSV (n rows, p columns)");
      s->add_option("--y", cfg.y_path, "Response matrix CSV (n rows, q columns)");
      s->add_flag("--header", cfg.header, "Skip one header row in both CSV files");
      s->add_flag("--center", cfg.center, "Subtract column means of X and Y before fitting");
      s->add_flag("--keep-normalized", cfg.keep_normalized,
                  "Report coefficients on the internal unit-scale design instead of the original scale");
    }
    for (auto* s : {fit, bench}) {
      s->add_option("--rank", cfg.rank, "Rank for a fixed fit (bench: used by the 'fixed' method)");
      s->add_option("--sparsity", cfg.sparsity, "Number of nonzero coefficient rows for a fixed fit");
    }
    for (auto* s : {tune, simulate, bench}) {
      s->add_option("--smax", cfg.smax, "Largest sparsity searched (capped at p)");
      s->add_option("--rmax", cfg.rmax, "Largest rank searched (capped at min(n, q))");
      s->add_option("--train-fraction", cfg.train_fraction, "Training share of rows for validation tuning");
      s->add_option("--seed", cfg.seed, "Seed for data generation and the validation split");
    }
    for (auto* s : {tune, simulate}) {
      s->add_option("--tune-mode", cfg.tune_mode, "gic (two-stage), grid (exhaustive GIC) or cv (validation split)")
          ->check(CLI::IsMember({"gic", "grid", "cv"}));
    }
    for (auto* s : {simulate, bench}) {
      s->add_option("--n", cfg.n, "Observations");
      s->add_option("--p", cfg.p, "Predictors");
      s->add_option("--q", cfg.q, "Responses");
      s->add_option("--sstar", cfg.sstar, "True number of nonzero rows");
      s->add_option("--rstar", cfg.rstar, "True rank");
      s->add_option("--snr", cfg.snr, "Signal-to-noise ratio sigma_r*(XC*) / ||E||_F");
      s->add_option("--noise", cfg.noise, "Noise covariance: ar (0.3^|i-j|) or sc (0.3 off-diagonal)")
          ->check(CLI::IsMember({"ar", "sc"}));
    }
    simulate->add_option("--data-prefix", cfg.data_prefix,
                         "When set, write <prefix>X.csv, <prefix>Y.csv and <prefix>C_star.csv");
    bench->add_option("--reps", cfg.reps, "Replications");
    bench->add_option("--methods", cfg.methods, "Methods to run: gic, grid, cv, fixed")
        ->delimiter(',')
        ->check(CLI::IsMember({"gic", "grid", "cv", "fixed"}));
    bench->add_option("--threads", cfg.threads, "Worker threads (0: MRBESS_THREADS, else all cores)");

    for (auto* s : {fit, tune, simulate, bench}) {
      s->add_option("--tol", cfg.tol, "Stop when ||C_new - C_old||_F <= tol");
      s->add_option("--max-iter", cfg.max_iter, "Iteration cap per fixed fit");
      s->add_option("--gram-policy", cfg.gram_policy, "Singular X_A^T X_A: error or pinv")
          ->check(CLI::IsMember({"error", "pinv"}));
      s->add_option("--out", cfg.out, "Report path (stdout when omitted)");
      s->add_option("--format", cfg.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    }
    for (auto* s : {fit, tune, simulate})
      s->add_option("--coef", cfg.coef, "Coefficient CSV path (default: <out stem>_C.csv, or mrbess_C.csv)");
  }

  CLI::App* active() const {
    for (auto* s : {fit, tune, simulate, bench})
      if (s->parsed()) return s;
    return nullptr;
  }
};

bool given(const CLI::App* s, const std::string& name) {
  const auto* opt = s->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

void validate(const CLI::App* sub, const RunConfig& c) {
  std::vector<std::string> bad;
  const std::string& cmd = c.subcommand;
  auto need = [&](const char* flag) {
    if (!given(sub, flag)) bad.push_back(std::string("missing required flag ") + flag);
  };
  if (cmd == "fit" || cmd == "tune") {
    need("--x");
    need("--y");
  }
  if (cmd == "fit") {
    need("--rank");
    need("--sparsity");
    if (given(sub, "--rank") && c.rank < 1) bad.push_back("--rank must be >= 1");
    if (given(sub, "--sparsity") && c.sparsity < 1) bad.push_back("--sparsity must be >= 1");
  }
  if (cmd == "bench") {
    const bool fixed = std::find(c.methods.begin(), c.methods.end(), "fixed") != c.methods.end();
    if (fixed) {
      need("--rank");
      need("--sparsity");
    }
    if (c.reps < 1) bad.push_back("--reps must be >= 1");
    if (c.methods.empty()) bad.push_back("--methods must name at least one method");
  }
  if (cmd == "bench" || cmd == "simulate") {
    if (c.n < 3) bad.push_back("--n must be >= 3");
    if (c.p < 1) bad.push_back("--p must be >= 1");
    if (c.q < 1) bad.push_back("--q must be >= 1");
    if (c.rstar < 1) bad.push_back("--rstar must be >= 1");
    if (c.sstar < c.rstar) bad.push_back("--sstar must be >= --rstar");
    if (c.sstar > c.p) bad.push_back("--sstar must be <= --p");
    if (c.rstar > std::min(c.n, c.q)) bad.push_back("--rstar must be <= min(--n, --q)");
    if (!(c.snr > 0)) bad.push_back("--snr must be > 0");
  }
  if (cmd != "fit") {
    if (c.smax < 1) bad.push_back("--smax must be >= 1");
    if (c.rmax < 1) bad.push_back("--rmax must be >= 1");
    if (!(c.train_fraction > 0 && c.train_fraction < 1)) bad.push_back("--train-fraction must lie in (0, 1)");
  }
  if (!(c.tol > 0)) bad.push_back("--tol must be > 0");
  if (c.max_iter < 1) bad.push_back("--max-iter must be >= 1");
  if (!bad.empty()) {
    std::string msg;
    for (std::size_t i = 0; i < bad.size(); ++i) msg += (i ? "; " : "") + bad[i];
    throw UsageError(msg);
  }
}

SolverConfig solver_config(const RunConfig& c) {
  SolverConfig s;
  s.rank = std::max<Index>(c.rank, 1);
  s.sparsity = std::max<Index>(c.sparsity, 1);
  s.tol = c.tol;
  s.max_iter = c.max_iter;
  s.gram_policy = c.gram_policy == "pinv" ? GramPolicy::pseudo_inverse : GramPolicy::error_on_singular;
  return s;
}

sim::SimulationSpec simulation_spec(const RunConfig& c) {
  sim::SimulationSpec s;
  s.n = c.n;
  s.p = c.p;
  s.q = c.q;
  s.s_star = c.sstar;
  s.r_star = c.rstar;
  s.snr = c.snr;
  s.noise_kind = sim::parse_noise_kind(c.noise);
  s.replications = c.subcommand == "bench" ? c.reps : 1;
  s.base_seed = c.seed;
  return s;
}

json config_echo(const RunConfig& c) {
  json j = {{"tol", c.tol}, {"max_iter", c.max_iter}, {"gram_policy", c.gram_policy}, {"format", c.format}};
  if (c.subcommand == "fit" || c.subcommand == "tune") {
    j["x"] = c.x_path;
    j["y"] = c.y_path;
    j["header"] = c.header;
    j["center"] = c.center;
    j["keep_normalized"] = c.keep_normalized;
  }
  if (c.subcommand == "fit") {
    j["rank"] = c.rank;
    j["sparsity"] = c.sparsity;
  } else {
    j["smax"] = c.smax;
    j["rmax"] = c.rmax;
    j["train_fraction"] = c.train_fraction;
    j["seed"] = c.seed;
  }
  if (c.subcommand == "tune" || c.subcommand == "simulate") j["tune_mode"] = c.tune_mode;
  if (c.subcommand == "simulate" || c.subcommand == "bench") {
    j["n"] = c.n;
    j["p"] = c.p;
    j["q"] = c.q;
    j["sstar"] = c.sstar;
    j["rstar"] = c.rstar;
    j["snr"] = c.snr;
    j["noise"] = c.noise;
  }
  if (c.subcommand == "bench") {
    j["reps"] = c.reps;
    j["methods"] = c.methods;
  }
  return j;
}

std::string coef_path(const RunConfig& c) {
  if (!c.coef.empty()) return c.coef;
  if (c.out.empty()) return "mrbess_C.csv";
  std::filesystem::path p(c.out);
  return (p.parent_path() / (p.stem().string() + "_C.csv")).string();
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MRBESS_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

sim::TunerSpec tuner_for(const std::string& mode, const RunConfig& c) {
  if (mode == "gic") return sim::TunerSpec::gic(c.smax, c.rmax);
  if (mode == "grid") return sim::TunerSpec::grid(c.smax, c.rmax);
  if (mode == "cv") return sim::TunerSpec::validation(c.smax, c.rmax, c.train_fraction);
  if (mode == "fixed") return sim::TunerSpec::fixed(c.rank, c.sparsity);
  throw UsageError("unknown method '" + mode + "'");
}

Dataset<double> load_dataset(const RunConfig& c) {
  const Eigen::MatrixXd X = io::read_csv_matrix(c.x_path, c.header);
  const Eigen::MatrixXd Y = io::read_csv_matrix(c.y_path, c.header);
  std::clog << "mrbess: read X " << X.rows() << "x" << X.cols() << " from " << c.x_path << ", Y " << Y.rows() << "x"
            << Y.cols() << " from " << c.y_path << "\n";
  return validate_and_normalize(X, Y, c.center);
}

}  // namespace

RunConfig parse_args(int argc, const char* const* argv) {
  Parser parser;
  try {
    parser.app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    RunConfig c;
    const CLI::App* sub = nullptr;
    for (auto* s : {parser.fit, parser.tune, parser.simulate, parser.bench})
      if (s->parsed()) sub = s;
    c.help = sub ? sub->help() : parser.app.help();
    return c;
  } catch (const CLI::CallForAllHelp&) {
    RunConfig c;
    c.help = parser.app.help("", CLI::AppFormatMode::All);
    return c;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    throw UsageError(msg);
  }
  const CLI::App* sub = parser.active();
  parser.cfg.subcommand = sub->get_name();
  validate(sub, parser.cfg);
  return parser.cfg;
}

void run(const RunConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  const auto format = io::parse_format(c.format);
  const SolverConfig base = solver_config(c);
  json report = {{"command", c.subcommand}, {"config", config_echo(c)}, {"tune_trace", nullptr}};

  if (c.subcommand == "fit" || c.subcommand == "tune") {
    const auto data = load_dataset(c);
    FitResult<double> fit;
    if (c.subcommand == "fit") {
      fit = solve_fixed(data, base);
    } else {
      const Index s_max = std::min(c.smax, data.p());
      const Index r_max = std::min({c.rmax, data.n(), data.q()});
      TuneReport<double> rep = c.tune_mode == "gic"    ? tune_gic(data, s_max, r_max, base)
                               : c.tune_mode == "grid" ? tune_grid_gic(data, s_max, r_max, base)
                                                       : tune_validation(data, s_max, r_max, c.train_fraction, c.seed, base);
      report["tune_trace"] = io::tune_trace_json(rep);
      fit = std::move(rep.fit);
    }
    const Eigen::MatrixXd C = c.keep_normalized ? fit.C : denormalize_coefficients(fit.C, data.col_scales);
    const std::string cpath = coef_path(c);
    io::write_csv_matrix(cpath, C);
    report["fit"] = io::fit_json(fit, cpath, c.keep_normalized);
  } else if (c.subcommand == "simulate") {
    const auto spec = simulation_spec(c);
    const std::uint64_t seed = c.seed;
    const auto rep = sim::generate_replication(spec, seed);
    if (!c.data_prefix.empty()) {
      io::write_csv_matrix(c.data_prefix + "X.csv", rep.X);
      io::write_csv_matrix(c.data_prefix + "Y.csv", rep.Y);
      io::write_csv_matrix(c.data_prefix + "C_star.csv", rep.truth.C_star);
    }
    const auto t_fit = std::chrono::steady_clock::now();
    const auto run = sim::run_tuner(tuner_for(c.tune_mode, c), rep.X, rep.Y, seed, base);
    const double fit_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_fit).count();
    const std::string cpath = coef_path(c);
    io::write_csv_matrix(cpath, run.C);
    report["fit"] = io::fit_json(run.fit, cpath, false);
    report["metrics"] = io::metrics_json(compute_metrics(run.C, rep.truth.C_star, rep.X, fit_time));
    report["simulation"] = io::simulation_spec_json(spec);
    report["simulation"]["omega"] = rep.noise.omega;
    report["simulation"]["realized_snr"] = rep.noise.realized_snr;
  } else {
    const auto spec = simulation_spec(c);
    std::vector<sim::TunerSpec> tuners;
    for (const auto& m : c.methods) tuners.push_back(tuner_for(m, c));
    const auto table = sim::run_benchmark(spec, tuners, resolve_threads(c.threads), base);
    report["fit"] = nullptr;
    report["table"] = io::benchmark_json(table);
    report["failed_replications"] = table.failed_replications;
    report["simulation"] = io::simulation_spec_json(spec);
    report["timing_s"] = elapsed();
    io::write_report(report, format, c.out, &table);
    return;
  }
  report["timing_s"] = elapsed();
  io::write_report(report, format, c.out);
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = parse_args(argc, argv);
    if (cfg.help) {
      out << *cfg.help;
      return 0;
    }
    run(cfg);
    return 0;
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const SingularGram& e) {
    err << "error: singular_gram: " << e.what() << "\n";
  } catch (const io::IoError& e) {
    err << "error: io: " << e.what() << "\n";
  } catch (const InvalidInput& e) {
    err << "error: invalid_input: " << e.what() << "\n";
  } catch (const InvalidConfig& e) {
    err << "error: invalid_config: " << e.what() << "\n";
  } catch (const Error& e) {
    err << "error: failed: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace mrbess::cli
