#pragma once

// Hand-rolled generators for property tests. Each draws from its own
// std::mt19937_64 so a failing case is reproduced from its seed alone.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hdmed/dataset.hpp"

namespace gen {

struct Shape {
  std::size_t n = 60;
  std::size_t p = 4;
  std::size_t q = 0;
  double censor_prob = 0.3;
  /// Round x to this grid (0 = continuous) so that ties appear.
  double grid = 0.0;
  /// Mediator 0 loads on the exposure with this coefficient.
  double signal = 0.5;
};

/// Random survival data with both exposure levels in the first two rows,
/// so that every prefix of length >= 2 satisfies positivity.
inline hdmed::Dataset dataset(std::uint64_t seed, const Shape& s) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> norm;
  std::uniform_real_distribution<double> unif;
  std::vector<double> x(s.n);
  std::vector<std::uint8_t> delta(s.n), a(s.n);
  hdmed::RowMatrix b(static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(s.p));
  hdmed::RowMatrix z(static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(s.q));
  for (std::size_t i = 0; i < s.n; ++i) {
    a[i] = i < 2 ? static_cast<std::uint8_t>(i) : static_cast<std::uint8_t>(unif(eng) < 0.5);
    for (std::size_t k = 0; k < s.p; ++k) {
      b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          norm(eng) + (k == 0 ? s.signal * a[i] : 0.0);
    }
    for (std::size_t l = 0; l < s.q; ++l) {
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = norm(eng);
    }
    double t = 0.3 * a[i] + (s.p > 0 ? 0.4 * b(static_cast<Eigen::Index>(i), 0) : 0.0) + norm(eng);
    if (s.grid > 0) t = std::round(t / s.grid) * s.grid;
    x[i] = t;
    delta[i] = unif(eng) >= s.censor_prob;
  }
  return hdmed::Dataset(std::move(x), std::move(delta), std::move(a), std::move(b), std::move(z));
}

inline double uniform(std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 eng(seed);
  return std::uniform_real_distribution<double>(lo, hi)(eng);
}

/// Least squares by explicit normal equations and Gauss-Jordan inversion.
/// Deliberately naive: it is the oracle, not the implementation.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& rows,
                                            const std::vector<double>& y) {
  const std::size_t c = rows[0].size();
  std::vector<std::vector<double>> m(c, std::vector<double>(2 * c, 0.0));
  std::vector<double> xty(c, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t r = 0; r < c; ++r) {
      xty[r] += rows[i][r] * y[i];
      for (std::size_t s = 0; s < c; ++s) m[r][s] += rows[i][r] * rows[i][s];
    }
  }
  for (std::size_t r = 0; r < c; ++r) m[r][c + r] = 1.0;
  for (std::size_t col = 0; col < c; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < c; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    const double d = m[col][col];
    for (auto& v : m[col]) v /= d;
    for (std::size_t r = 0; r < c; ++r) {
      if (r == col) continue;
      const double f = m[r][col];
      for (std::size_t s = 0; s < 2 * c; ++s) m[r][s] -= f * m[col][s];
    }
  }
  std::vector<double> coef(c, 0.0);
  for (std::size_t r = 0; r < c; ++r) {
    for (std::size_t s = 0; s < c; ++s) coef[r] += m[r][c + s] * xty[s];
  }
  return coef;
}

}  // namespace gen
