#include "mrbess/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mrbess::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool blank(const std::string& line) { return trim(line).empty(); }

}  // namespace

Eigen::MatrixXd parse_csv_matrix(std::istream& in, bool has_header, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<double> row;
    std::size_t col = 0, start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const std::string cell = trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      ++col;
      double v = 0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (cell.empty() || ec != std::errc() || ptr != last)
        throw IoError(source + ": non-numeric cell '" + cell + "' at line " + std::to_string(line_no) +
                      ", column " + std::to_string(col));
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(source + ": ragged row at line " + std::to_string(line_no) + " (" + std::to_string(row.size()) +
                    " cells, expected " + std::to_string(rows.front().size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(source + ": no data rows");

  Eigen::MatrixXd M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return M;
}

Eigen::MatrixXd read_csv_matrix(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_csv_matrix(in, has_header, path);
}

std::string format_csv_matrix(const Eigen::MatrixXd& M) {
  std::string out;
  char buf[32];
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) out += ',';
      std::snprintf(buf, sizeof buf, "%.16e", M(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& M) { write_text(path, format_csv_matrix(M)); }

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json gic_records_json(const std::vector<GicRecord>& recs) {
  json arr = json::array();
  for (const auto& g : recs) {
    arr.push_back({{"s", g.s},
                   {"r", g.r_nominal},
                   {"r_effective", g.r_effective},
                   {"r_penalty", g.r_penalty},
                   {"loss", g.failed ? json(nullptr) : json(g.loss)},
                   {"penalty", g.failed ? json(nullptr) : json(g.penalty)},
                   {"gic", finite_or_null(g.gic)},
                   {"iterations", g.iterations},
                   {"status", g.failed ? "failed" : to_string(g.status)}});
    if (g.failed) arr.back()["error"] = g.error;
  }
  return arr;
}

}  // namespace

json fit_json(const FitResult<double>& fit, const std::string& c_path, bool normalized_scale) {
  json active = json::array();
  for (Index j : fit.active_set) active.push_back(j + 1);
  return {{"active_set", active},
          {"rank", fit.rank},
          {"sparsity", fit.sparsity},
          {"loss", fit.loss},
          {"gic", finite_or_null(fit.gic)},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"cycled", fit.cycled},
          {"rank_capped", fit.rank_capped},
          {"status", to_string(fit.trace.status)},
          {"C_path", c_path},
          {"coefficient_scale", normalized_scale ? "normalized" : "original"}};
}

json tune_trace_json(const TuneReport<double>& rep) {
  json j = {{"mode", to_string(rep.mode)}, {"s_hat", rep.s_hat}, {"r_hat", rep.r_hat}, {"solves", rep.solves}};
  if (rep.mode == TuneMode::gic) {
    j["stage1"] = gic_records_json(rep.stage1);
    j["stage2"] = gic_records_json(rep.stage2);
  } else if (rep.mode == TuneMode::grid) {
    j["grid"] = gic_records_json(rep.grid);
  } else {
    json arr = json::array();
    for (const auto& v : rep.validation) {
      arr.push_back({{"s", v.s},
                     {"r", v.r},
                     {"val_error", finite_or_null(v.val_error)},
                     {"iterations", v.iterations},
                     {"status", v.failed ? "failed" : to_string(v.status)}});
    }
    j["validation"] = arr;
    j["n_train"] = rep.train_rows.size();
  }
  return j;
}

json metrics_json(const MetricsRecord& m) {
  return {{"er_c", m.er_c}, {"er_xc", m.er_xc}, {"fpr", m.fpr}, {"fnr", m.fnr}, {"est_rank", m.est_rank},
          {"wall_time_s", m.wall_time_s}};
}

json simulation_spec_json(const sim::SimulationSpec& s) {
  return {{"n", s.n},
          {"p", s.p},
          {"q", s.q},
          {"s_star", s.s_star},
          {"r_star", s.r_star},
          {"d0", s.d0},
          {"step", s.step},
          {"design_rho", s.design_rho},
          {"noise_kind", sim::to_string(s.noise_kind)},
          {"noise_rho", s.noise_rho},
          {"snr", s.snr},
          {"replications", s.replications},
          {"base_seed", s.base_seed}};
}

namespace {

const char* const kBenchColumns[] = {"method",        "p",           "ErC_x1000_mean", "ErC_x1000_sd", "ErXC_x10_mean",
                                     "ErXC_x10_sd",   "FPR_pct_mean", "FPR_pct_sd",     "FNR_pct_mean", "FNR_pct_sd",
                                     "time_s_mean",   "time_s_sd",    "rank_mean",      "rank_sd"};

std::vector<double> bench_values(const sim::BenchmarkRow& r) {
  return {r.er_c_x1000.mean, r.er_c_x1000.sd, r.er_xc_x10.mean, r.er_xc_x10.sd, r.fpr_pct.mean, r.fpr_pct.sd,
          r.fnr_pct.mean,    r.fnr_pct.sd,    r.time_s.mean,    r.time_s.sd,    r.rank.mean,    r.rank.sd};
}

}  // namespace

std::string benchmark_csv(const sim::BenchmarkTable& table) {
  std::ostringstream out;
  for (std::size_t i = 0; i < std::size(kBenchColumns); ++i) out << (i ? "," : "") << kBenchColumns[i];
  out << '\n';
  char buf[32];
  for (const auto& r : table.rows) {
    out << r.method << ',' << r.p;
    for (double v : bench_values(r)) {
      std::snprintf(buf, sizeof buf, "%.10g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

json benchmark_json(const sim::BenchmarkTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    json row = {{"method", r.method}, {"p", r.p}, {"replications", r.replications}, {"failed", r.failed}};
    const auto vals = bench_values(r);
    for (std::size_t i = 0; i < vals.size(); ++i) row[kBenchColumns[i + 2]] = vals[i];
    rows.push_back(row);
  }
  return rows;
}

ReportFormat parse_format(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  throw InvalidConfig("unknown format '" + s + "' (expected json or csv)");
}

namespace {

void flatten(const json& j, const std::string& prefix, std::ostringstream& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array()) {
    if (std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); })) {
      std::string joined;
      for (const auto& e : j) joined += (joined.empty() ? "" : " ") + e.dump();
      out << prefix << ",\"" << joined << "\"\n";
    }
    // Nested record arrays (tuning traces) are JSON-only.
  } else {
    out << prefix << ',' << (j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
  }
}

}  // namespace

void write_report(const json& report, ReportFormat format, const std::string& path, const sim::BenchmarkTable* table) {
  std::string text;
  if (format == ReportFormat::json) {
    text = report.dump(2) + "\n";
  } else if (table != nullptr) {
    text = benchmark_csv(*table);
  } else {
    std::ostringstream out;
    out << "key,value\n";
    flatten(report, "", out);
    text = out.str();
  }
  if (path.empty())
    std::cout << text;
  else
    write_text(path, text);
}

}  // namespace mrbess::io
