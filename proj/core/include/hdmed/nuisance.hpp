#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hdmed/censoring.hpp"
#include "hdmed/dataset.hpp"

namespace hdmed {

inline constexpr double kDenominatorFloor = 1e-12;
inline constexpr double kSeparationBound = 15.0;
inline constexpr int kMaxLogisticIterations = 50;
inline constexpr double kLogisticTolerance = 1e-8;
inline constexpr double kLogisticRidge = 1e-10;
inline constexpr double kMaskedVarianceFloor = 1e-14;
inline constexpr double kMinusInfinity = -std::numeric_limits<double>::infinity();

/// Which sample the prefix-indexed nuisances come from. Under `appendix`
/// everything but the censoring fit uses the first j rows; under `full`
/// every nuisance uses all n rows.
enum class NuisanceScope { appendix, full };

/// How E(a, u, s, k) is fitted on the risk set {A = a, X >= s}. `subsample`
/// is ordinary least squares of Y on B_k within the risk set. `masked` takes
/// the covariance and means of the indicator-masked variables B_k 1{..} and
/// Y 1{..} averaged over the whole prefix; its intercept is scaled by the
/// risk-set fraction, so it does not estimate the conditional mean.
enum class ConditionalMeanForm { subsample, masked };

struct ExposureProb {
  double p0 = 0.5;
  double p1 = 0.5;
};

struct MediatorMeans {
  double q0 = 0.0;
  double q1 = 0.0;
  double zeta = 0.0;
};

/// Logistic fit of A on (1, B_k); recip_odds(u) = P(A=0|u) / P(A=1|u).
struct LogisticFit {
  double theta0 = 0.0;
  double theta1 = 0.0;
  bool separated = false;
  int iterations = 0;

  double recip_odds(double u) const { return std::exp(-(theta0 + theta1 * u)); }
};

/// u -> intercept + slope * u, clamped to [lower, upper].
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  bool fallback = false;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  double operator()(double u) const { return std::clamp(intercept + slope * u, lower, upper); }
};

// Direct (two-pass) fits over rows [0, len). These define the estimators;
// PrefixMoments reproduces the first three from running sums.

ExposureProb fit_exposure_prob(std::span<const std::uint8_t> a);

/// Group means of B_k. With `adjust_for_z`, zeta is the A coefficient of
/// B_k on (1, A, Z) and q(a) are the fitted means at the average Z.
MediatorMeans fit_conditional_mediator_means(const Dataset& d, std::size_t len, std::size_t k,
                                             bool adjust_for_z = false);

/// KSV slope of the IPCW response on B_k given A (and Z when adjusting).
double fit_ksv_slope(const Dataset& d, std::size_t len, std::size_t k, std::span<const double> y,
                     bool adjust_for_z = false);

/// Maximum-likelihood logistic regression of A on (1, B_k) by IRLS, started
/// at (logit(mean a), 0). |theta_1| > kSeparationBound is treated as
/// separation: both coefficients are clipped and `separated` is set.
LogisticFit fit_reciprocal_odds(const Dataset& d, std::size_t len, std::size_t k);

/// Regression of Y on B_k over the risk set {A = a, X >= s} of the prefix.
/// Under ConditionalMeanForm::subsample the fitted line is clamped to the
/// range of Y on the risk set, since a conditional mean cannot leave it.
/// Under ConditionalMeanForm::masked the moments are
///   slope = Cov(B 1{X>=s,A=a}, Y 1{X>=s,A=a}) / Var(B 1{X>=s,A=a}),
///   intercept = P[Y 1{..}] - slope P[B 1{..}],
/// averaged over the whole prefix. `s` may be kMinusInfinity. A risk set
/// with fewer than two members or a vanishing variance falls back to the
/// s = -inf fit with `fallback` set.
LinearFit fit_conditional_mean_regression(
    const Dataset& d, std::size_t len, std::size_t k, bool a, double s, std::span<const double> y,
    ConditionalMeanForm form = ConditionalMeanForm::subsample);

/// Running sums over a growing prefix of rows, O(p) per added row (plus
/// O(pq) with confounders).
class PrefixMoments {
 public:
  PrefixMoments(const Dataset& d, std::span<const double> y, bool track_confounders);

  void advance_to(std::size_t length);
  std::size_t length() const noexcept { return len_; }

  ExposureProb exposure() const;
  MediatorMeans means(std::size_t k) const;
  double ksv_slope(std::size_t k) const;

  /// Fills q0/q1/zeta/beta for every mediator; throws on the first failure.
  void fill(std::span<double> q0, std::span<double> q1, std::span<double> zeta,
            std::span<double> beta) const;

 private:
  MediatorMeans adjusted_means(std::size_t k, const Eigen::MatrixXd& base_inverse) const;
  double adjusted_slope(std::size_t k) const;
  Eigen::MatrixXd base_system_inverse() const;

  const Dataset* d_;
  std::span<const double> y_;
  bool track_z_;
  std::size_t len_ = 0;
  double sa_ = 0.0;
  double sy_ = 0.0;
  double say_ = 0.0;
  std::vector<double> sb_;
  std::vector<double> sbb_;
  std::vector<double> sab_;
  std::vector<double> sby_;
  Eigen::VectorXd sz_;
  Eigen::VectorXd saz_;
  Eigen::VectorXd szy_;
  Eigen::MatrixXd szz_;
  RowMatrix sbz_;
};

/// E(1, u, s_m, k) at every censoring jump s_m. Unclamped paths also carry
/// running integrals against dLambda so that the compensator of any
/// observation is O(log J); clamped paths are summed jump by jump.
struct CondMeanPath {
  std::vector<double> intercept;
  std::vector<double> slope;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::uint8_t> fallback;
  std::vector<double> cum_intercept;  // size J + 1
  std::vector<double> cum_slope;      // size J + 1
  std::size_t fallback_count = 0;
  bool clamped = false;

  double value(std::size_t m, double u) const {
    return std::clamp(intercept[m] + slope[m] * u, lower[m], upper[m]);
  }
};

/// The per-mediator ingredients that only the evaluated mediators need.
struct MediatorNuisance {
  std::size_t k = 0;
  LogisticFit recip_odds;
  LinearFit treated_mean;   // E(1, u, -inf, k)
  LinearFit control_mean;   // E(0, u, -inf, k)
  CondMeanPath treated_path;
};

MediatorNuisance build_mediator_nuisance(
    const Dataset& d, std::size_t len, std::size_t k, const CensoringFit& censoring,
    ConditionalMeanForm form = ConditionalMeanForm::subsample);

struct NuisanceOptions {
  bool adjust_for_z = false;
  ConditionalMeanForm cond_mean = ConditionalMeanForm::subsample;
};

std::string to_string(ConditionalMeanForm form);
ConditionalMeanForm parse_conditional_mean_form(const std::string& name);

/// The fitted bundle for one prefix: exposure probabilities, conditional
/// mediator means, KSV slopes and plug-in effects for every mediator, plus
/// lazily built per-mediator pieces. The censoring fit is shared and always
/// comes from the full sample.
///
/// Holds a non-owning reference to the dataset, which must outlive it.
/// Concurrent calls to mediator() are safe.
class NuisanceSet {
 public:
  NuisanceSet(const Dataset& data, std::shared_ptr<const CensoringFit> censoring,
              const PrefixMoments& moments, NuisanceOptions options = {});
  NuisanceSet(NuisanceSet&&) noexcept;
  NuisanceSet& operator=(NuisanceSet&&) noexcept;
  ~NuisanceSet();

  const Dataset& data() const noexcept { return *data_; }
  const CensoringFit& censoring() const noexcept { return *censoring_; }
  std::span<const double> y() const noexcept { return censoring_->responses.y; }
  std::size_t prefix_length() const noexcept { return len_; }
  std::size_t p() const noexcept { return psi_.size(); }
  const NuisanceOptions& options() const noexcept { return options_; }

  const ExposureProb& exposure() const noexcept { return exposure_; }
  std::span<const double> q0() const noexcept { return q0_; }
  std::span<const double> q1() const noexcept { return q1_; }
  std::span<const double> zeta() const noexcept { return zeta_; }
  std::span<const double> beta() const noexcept { return beta_; }
  std::span<const double> psi() const noexcept { return psi_; }

  const MediatorNuisance& mediator(std::size_t k) const;

 private:
  struct Cache;

  const Dataset* data_;
  std::shared_ptr<const CensoringFit> censoring_;
  std::size_t len_;
  NuisanceOptions options_;
  ExposureProb exposure_;
  std::vector<double> q0_, q1_, zeta_, beta_, psi_;
  std::unique_ptr<Cache> cache_;
};

NuisanceSet assemble_nuisance(const Dataset& d, std::size_t len,
                              std::shared_ptr<const CensoringFit> censoring,
                              NuisanceOptions options = {});

}  // namespace hdmed
