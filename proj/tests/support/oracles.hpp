#pragma once

// Independent numeric oracles: closed forms and bisection on std::erfc,
// never the library's own routines.

#include <cmath>

namespace oracle {

inline double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Phi^{-1}(p) by bisection on phi.
inline double phi_inv(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
