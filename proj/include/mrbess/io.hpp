#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Dense>
#include "json.hpp"

#include "mrbess/simulation.hpp"
#include "mrbess/tuning.hpp"
#include "mrbess/types.hpp"

namespace mrbess::io {

using nlohmann::json;

class IoError : public Error {
 public:
  using Error::Error;
};

/// Rectangular numeric CSV (comma separated, optional single header row).
Eigen::MatrixXd parse_csv_matrix(std::istream& in, bool has_header, const std::string& source = "<stream>");
Eigen::MatrixXd read_csv_matrix(const std::string& path, bool has_header = false);

/// One row per matrix row, 17 significant digits in scientific notation.
void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& M);
std::string format_csv_matrix(const Eigen::MatrixXd& M);

void write_text(const std::string& path, const std::string& content);

json fit_json(const FitResult<double>& fit, const std::string& c_path, bool normalized_scale);
json tune_trace_json(const TuneReport<double>& report);
json metrics_json(const MetricsRecord& m);
json simulation_spec_json(const sim::SimulationSpec& spec);

/// Summary table: mean and sd of each metric, one row per method.
std::string benchmark_csv(const sim::BenchmarkTable& table);
json benchmark_json(const sim::BenchmarkTable& table);

enum class ReportFormat { json, csv };
ReportFormat parse_format(const std::string& s);

/// Writes `report` (the JSON document of a subcommand) to `path`, or to stdout
/// when path is empty. CSV output flattens scalar fields into "key,value" lines;
/// bench reports write the benchmark table instead.
void write_report(const json& report, ReportFormat format, const std::string& path,
                  const sim::BenchmarkTable* table = nullptr);

}  // namespace mrbess::io
