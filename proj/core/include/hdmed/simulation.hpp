#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hdmed/dataset.hpp"
#include "hdmed/nuisance.hpp"

namespace hdmed {

/// Data-generating scenarios. The primed variants add an independent
/// Bernoulli(0.4) confounder Z to the outcome model.
enum class Model { M0, M1, M2, M0p, M1p, M2p };

struct SimulationSpec {
  Model model = Model::M0;
  std::size_t n = 800;
  std::size_t p = 100;
  double censor_target = 0.20;
  std::uint64_t seed = 1;
  /// Coefficient of Z in T; defaults to -0.1 for primed models.
  std::optional<double> z_coef;

  bool primed() const noexcept;
  double z_coefficient() const noexcept;
  /// max_k |Psi_k|: 0 for M0/M0', 0.2 otherwise.
  double true_psi() const noexcept;
  void validate() const;
};

/// Exponential rate for C = log(Exponential(rate)) giving P(T > C) within
/// 0.005 of `target`, found by bisection in log-rate on 10^5 common random
/// (T, C) pairs. target = 0 returns 0 (no censoring).
double calibrate_censoring_rate(const SimulationSpec& spec, double target, std::uint64_t seed);

/// One sample of size spec.n. `censor_rate` = 0 disables censoring.
/// Z is drawn from its own stream, so a primed model with z_coef = 0
/// reproduces the unprimed sample exactly (plus the Z column).
Dataset generate(const SimulationSpec& spec, std::uint64_t seed, double censor_rate);
/// As above, calibrating the rate to spec.censor_target first.
Dataset generate(const SimulationSpec& spec, std::uint64_t seed);

enum class Method { stabilized, bonferroni, naive, oracle };

struct StudyConfig {
  std::vector<Method> methods{Method::stabilized};
  std::size_t reps = 500;
  double qn_fraction = 0.8;
  std::optional<std::size_t> qn;
  double alpha = 0.1;
  bool extended = false;
  Standardization standardization = Standardization::normal_score;
  NuisanceScope scope = NuisanceScope::appendix;
  ConditionalMeanForm cond_mean = ConditionalMeanForm::subsample;
  std::size_t oracle_k = 0;
  std::size_t threads = 1;
};

struct ReplicationRecord {
  std::size_t rep = 0;
  Method method = Method::stabilized;
  std::size_t p = 0;
  bool ok = false;
  std::string failure;
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  bool covered = false;
  /// (estimate - Psi) / se, i.e. sqrt(n - qn)(S* - Psi)/sigma_bar for the
  /// stabilized estimator.
  double standardized = 0.0;
};

struct MethodSummary {
  Method method = Method::stabilized;
  bool extended = false;
  std::size_t p = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  double coverage = 0.0;
  double mean_width = 0.0;
  double mean_estimate = 0.0;
  double rejection_rate = 0.0;
  std::vector<double> standardized;  // successful replications, rep order
};

struct CoverageReport {
  Model model = Model::M0;
  std::size_t n = 0;
  double true_psi = 0.0;
  double alpha = 0.1;
  double censor_rate = 0.0;
  std::vector<MethodSummary> rows;
  std::vector<ReplicationRecord> replications;

  const MethodSummary& row(Method method, std::size_t p) const;
};

/// Replication r uses generate(spec, derive_seed(spec.seed, r)) at a rate
/// calibrated once per study, standardizes the mediators, randomly orders
/// the rows and runs every requested method. Failed replications are kept
/// with their reason and excluded from the summaries.
CoverageReport run_coverage_study(const SimulationSpec& spec, const StudyConfig& config);

/// Header: model,method,extended,n,p,reps,failures,coverage,mean_width,
/// mean_estimate,rejection_rate,alpha
void write_coverage_csv(std::ostream& out, const std::vector<CoverageReport>& reports);
/// Header: model,method,p,index,theoretical,statistic (statistics sorted).
void write_qq_csv(std::ostream& out, const std::vector<CoverageReport>& reports);
/// Header: model,method,p,rep,ok,estimate,se,ci_low,ci_high,p_value,covered,standardized,failure
void write_replications_csv(std::ostream& out, const std::vector<CoverageReport>& reports);

std::string to_string(Model model);
Model parse_model(const std::string& name);
std::string to_string(Method method);
Method parse_method(const std::string& name);

}  // namespace hdmed
