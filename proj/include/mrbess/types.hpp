#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mrbess {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Sorted, duplicate-free row indices (0-based) of a coefficient matrix.
using ActiveSet = std::vector<Index>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// X_A^T X_A is numerically singular and the policy forbids a pseudo-inverse.
class SingularGram : public Error {
 public:
  SingularGram(Index set_size, double condition)
      : Error("singular Gram matrix on active set of size " + std::to_string(set_size) +
              " (condition number " + std::to_string(condition) + ")"),
        set_size_(set_size) {}
  Index set_size() const noexcept { return set_size_; }

 private:
  Index set_size_;
};

enum class GramPolicy { error_on_singular, pseudo_inverse };

enum class Termination { tol_converged, active_set_fixed_point, cycle_detected, max_iter };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::tol_converged: return "tol_converged";
    case Termination::active_set_fixed_point: return "active_set_fixed_point";
    case Termination::cycle_detected: return "cycle_detected";
    case Termination::max_iter: return "max_iter";
  }
  return "unknown";
}

/// Design and response after validation. Columns of X have norm sqrt(n), except
/// identically-zero columns, which stay zero and carry col_scales[j] == 0.
template <typename Scalar>
struct Dataset {
  Matrix<Scalar> X;
  Matrix<Scalar> Y;
  Vector<Scalar> col_scales;
  bool centered = false;
  Vector<Scalar> x_means;  // empty unless centered
  Vector<Scalar> y_means;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
  Index q() const { return Y.cols(); }
};

struct SolverConfig {
  Index rank = 1;
  Index sparsity = 1;
  double tol = 1e-5;
  int max_iter = 100;
  GramPolicy gram_policy = GramPolicy::error_on_singular;
  /// Replaces the screening initialization when non-empty. Must have `sparsity` entries.
  ActiveSet initial_active;
};

struct IterationRecord {
  std::uint64_t active_hash = 0;
  double c_change = 0;  // ||C^{k+1} - C^k||_F
  double loss = 0;
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  Termination status = Termination::max_iter;
};

template <typename Scalar>
struct FitResult {
  Matrix<Scalar> C;
  Matrix<Scalar> B;
  Matrix<Scalar> V;
  ActiveSet active_set;
  Index rank = 0;
  Index sparsity = 0;
  double loss = 0;
  double gic = 0;
  int iterations = 0;
  bool converged = false;
  bool cycled = false;
  /// Requested rank exceeded the sparsity and was lowered to it.
  bool rank_capped = false;
  /// Fewer than `rank` positive eigenvalues were available somewhere in the run.
  bool rank_deficient = false;
  IterationTrace trace;
};

struct MetricsRecord {
  double er_c = 0;
  double er_xc = 0;
  double fpr = 0;
  double fnr = 0;
  Index est_rank = 0;
  double wall_time_s = 0;
};

/// FNV-1a over the indices; used to label active sets in iteration traces.
inline std::uint64_t hash_active_set(const ActiveSet& a) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Index j : a) {
    auto v = static_cast<std::uint64_t>(j);
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace mrbess
