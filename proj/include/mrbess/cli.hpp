#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mrbess/types.hpp"

namespace mrbess::cli {

/// Bad command line. what() lists every violated constraint on one line.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::string subcommand;  // fit | tune | simulate | bench
  std::string x_path;
  std::string y_path;
  bool header = false;
  Index rank = 0;
  Index sparsity = 0;
  Index smax = 20;
  Index rmax = 10;
  double tol = 1e-5;
  int max_iter = 100;
  double train_fraction = 0.8;
  std::string gram_policy = "error";
  double snr = 0.5;
  Index n = 100;
  Index p = 200;
  Index q = 100;
  Index sstar = 10;
  Index rstar = 3;
  std::string noise = "ar";
  int reps = 20;
  std::uint64_t seed = 1;
  std::string tune_mode = "gic";  // gic | grid | cv
  std::vector<std::string> methods{"gic"};
  bool center = false;
  bool keep_normalized = false;
  std::string out;
  std::string coef;
  std::string data_prefix;
  std::string format = "json";
  unsigned threads = 0;  // 0: MRBESS_THREADS or hardware concurrency

  /// Set when --help was requested; holds the help text and nothing else is valid.
  std::optional<std::string> help;
};

/// Parses and validates argv (argv[0] is the program name).
RunConfig parse_args(int argc, const char* const* argv);

/// Executes a parsed config. Throws mrbess::Error on failure.
void run(const RunConfig& config);

/// Full entry point: parse, run, report a single-line error on stderr.
/// Returns the process exit code (0 success, 2 usage error, 1 other failure).
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mrbess::cli
