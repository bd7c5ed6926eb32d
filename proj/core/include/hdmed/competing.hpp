#pragma once

#include <cstddef>
#include <string>

#include "hdmed/dataset.hpp"
#include "hdmed/nuisance.hpp"

namespace hdmed {

enum class CompetitorMethod { bonferroni, naive, oracle };

/// Full-sample one-step inference for a single mediator. `estimate` is
/// m * S_k with m the sign of the plug-in Psi_k, so that it targets
/// |Psi_k| like the stabilized estimator does.
struct CompetitorResult {
  CompetitorMethod method = CompetitorMethod::oracle;
  std::size_t k_used = 0;
  double estimate = 0.0;
  double se = 0.0;
  double sigma_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double raw_p = 1.0;
  double p_value = 1.0;  // min(1, p * raw_p) for bonferroni
  double alpha = 0.1;
  double ci_level_alpha = 0.1;  // alpha / p for bonferroni
};

/// Selects k = argmax |Psi_k| on the full sample and reports the one-step
/// statistic with a Bonferroni factor of p on the p-value and interval.
CompetitorResult bonferroni_one_step(const Dataset& d, double alpha, NuisanceOptions options = {});

/// As bonferroni_one_step but ignoring the selection (anti-conservative).
CompetitorResult naive_one_step(const Dataset& d, double alpha, NuisanceOptions options = {});

/// One-step inference for a given mediator k (0-based).
CompetitorResult oracle_one_step(const Dataset& d, std::size_t k, double alpha,
                                 NuisanceOptions options = {});

std::string to_string(CompetitorMethod method);

}  // namespace hdmed
