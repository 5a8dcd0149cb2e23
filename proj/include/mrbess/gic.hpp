#pragma once

#include <cmath>
#include <string>

#include "mrbess/types.hpp"

namespace mrbess {

/// Complexity penalty q (s + r) log(log n) sqrt(log(p) / n).
inline double gic_penalty(Index n, Index p, Index q, Index s, Index r) {
  if (n < 3) throw InvalidInput("GIC penalty needs n >= 3, got n = " + std::to_string(n));
  if (p < 2) throw InvalidInput("GIC penalty needs p >= 2, got p = " + std::to_string(p));
  if (s < 0 || r < 0) throw InvalidInput("GIC penalty needs s, r >= 0");
  const auto nd = static_cast<double>(n);
  return static_cast<double>(q) * static_cast<double>(s + r) * std::log(std::log(nd)) *
         std::sqrt(std::log(static_cast<double>(p)) / nd);
}

/// Generalized information criterion: loss + gic_penalty(n, p, q, s, r).
inline double gic(double loss, Index n, Index p, Index q, Index s, Index r) {
  return loss + gic_penalty(n, p, q, s, r);
}

}  // namespace mrbess
