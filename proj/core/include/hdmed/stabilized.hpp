#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hdmed/dataset.hpp"
#include "hdmed/nuisance.hpp"

namespace hdmed {

inline constexpr double kSigmaFloor = 1e-10;

struct StabilizedConfig {
  NuisanceScope scope = NuisanceScope::appendix;
  bool adjust_for_z = false;
  ConditionalMeanForm cond_mean = ConditionalMeanForm::subsample;
  double alpha = 0.1;
  /// Prefix lengths at which the selected mediator is reported.
  std::size_t checkpoints = 5;
};

/// One held-out step: nuisances fitted on rows [0, j), evaluated at row j.
struct StepRecord {
  std::size_t j = 0;          // prefix length
  std::size_t k = 0;          // selected mediator (0-based)
  int m = 1;                  // sign of psi_k
  double psi = 0.0;           // Psi_k at the prefix fit
  double f_star_next = 0.0;   // f*_k at the held-out row
  double s_value = 0.0;       // psi + f_star_next
  double sigma_hat = 0.0;     // population sd of f*_k over the prefix
  double weight = 0.0;        // sigma_bar / sigma_hat
  double contribution = 0.0;  // weight * m * s_value
};

struct StabilizedEstimate {
  double s_star = 0.0;
  double sigma_bar = 0.0;
  std::size_t qn = 0;
  std::size_t n = 0;
  double alpha = 0.1;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  std::vector<StepRecord> trace;
  std::uint64_t ordering_seed = 0;
  std::size_t truncated_weights = 0;
  std::size_t fallback_fits = 0;

  /// sigma_bar / sqrt(n - qn).
  double se() const;
  /// sqrt(n - qn) * s_star / sigma_bar.
  double z() const;
};

struct Inference {
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
};

/// argmax_k |psi_k| with the smallest index winning ties; sign +1 at zero.
std::pair<std::size_t, int> select_mediator(std::span<const double> psi);

/// Weights, sigma_bar, S*_n and inference from per-step values (weight and
/// contribution fields of `steps` are overwritten).
StabilizedEstimate combine_steps(std::vector<StepRecord> steps, std::size_t n, std::size_t qn,
                                 double alpha);

Inference ci_pvalue(double s_star, double sigma_bar, std::size_t n, std::size_t qn, double alpha);
Inference ci_pvalue(const StabilizedEstimate& est, double alpha);

/// round(0.8 n), clamped into [1, n - 1].
std::size_t default_qn(std::size_t n);

/// Stabilized one-step estimator on an already ordered dataset.
StabilizedEstimate stabilized_one_step(const Dataset& ordered, std::size_t qn,
                                       const StabilizedConfig& config);

/// Evenly spaced checkpoint prefix lengths in [qn, n - 1].
std::vector<std::size_t> checkpoint_lengths(std::size_t n, std::size_t qn, std::size_t count);

struct OrderingResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool retried = false;
  std::optional<StabilizedEstimate> estimate;
  std::string failure;
};

struct OrderingEnsemble {
  std::vector<OrderingResult> results;
  std::size_t orderings = 0;
  double alpha = 0.1;
  double combined_p = 1.0;
  std::size_t reported = 0;     // index into results
  double combined_ci_low = 0.0;  // reported estimate at level alpha / M
  double combined_ci_high = 0.0;
  /// (mediator, count) selected at the checkpoints of the reported ordering,
  /// most frequent first.
  std::vector<std::pair<std::size_t, std::size_t>> checkpoint_selection;

  const StabilizedEstimate& reported_estimate() const;
};

/// Analyses M random orderings, seeded with derive_seed(seed, m), and
/// combines them with a Bonferroni correction.
OrderingEnsemble multi_ordering_analysis(const Dataset& d, std::size_t orderings, std::size_t qn,
                                         double alpha, std::uint64_t seed,
                                         const StabilizedConfig& config, std::size_t threads = 1);

std::string to_string(NuisanceScope scope);
NuisanceScope parse_nuisance_scope(const std::string& name);

}  // namespace hdmed
