#include "hdmed/normal.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "hdmed/error.hpp"

namespace hdmed {

namespace {
const boost::math::normal_distribution<double> kStandardNormal{0.0, 1.0};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw DomainError("normal", "quantile probability must lie in (0, 1)");
  }
  return boost::math::quantile(kStandardNormal, prob);
}

double two_sided_critical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("normal", "alpha must lie in (0, 1)");
  }
  return boost::math::quantile(boost::math::complement(kStandardNormal, alpha / 2.0));
}

double two_sided_p_value(double z) {
  if (std::isnan(z)) return 1.0;
  double p = std::erfc(std::abs(z) / std::sqrt(2.0));
  return p > 1.0 ? 1.0 : p;
}

}  // namespace hdmed
