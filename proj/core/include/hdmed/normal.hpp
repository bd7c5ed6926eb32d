#pragma once

namespace hdmed {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile; `prob` must lie in (0, 1).
double normal_quantile(double prob);

/// Upper alpha/2 quantile z_{alpha/2} used for two-sided intervals.
double two_sided_critical(double alpha);

/// 2 (1 - Phi(|z|)), computed through the upper tail to keep precision.
double two_sided_p_value(double z);

}  // namespace hdmed
