#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hdmed {

class Dataset;

/// Weights 1/G(x-) are capped at 1/kSurvivalFloor.
inline constexpr double kSurvivalFloor = 1e-6;

/// Product-limit survival G and Nelson-Aalen cumulative hazard Lambda of
/// the censoring time, both step functions jumping at the distinct censored
/// times. At a time shared by an event and a censoring the event is ranked
/// first, so the censoring risk set at s is {i : x_i >= s}.
class CensoringModel {
 public:
  static CensoringModel fit(std::span<const double> x, std::span<const std::uint8_t> delta);

  std::span<const double> jump_times() const noexcept { return jump_times_; }
  /// Delta Lambda at each jump: (#censored at s) / (#at risk at s).
  std::span<const double> hazard_increments() const noexcept { return dlambda_; }
  std::size_t jump_count() const noexcept { return jump_times_.size(); }
  /// End of follow-up: the largest observed x.
  double tau() const noexcept { return tau_; }

  /// Number of jump times <= s.
  std::size_t jumps_at_or_before(double s) const {
    return static_cast<std::size_t>(
        std::upper_bound(jump_times_.begin(), jump_times_.end(), s) - jump_times_.begin());
  }
  /// G(s), right-continuous.
  double survival(double s) const;
  /// G(s-), the product over jumps strictly before s.
  double survival_left(double s) const;
  /// Lambda(s), right-continuous.
  double cumulative_hazard(double s) const;

 private:
  std::vector<double> jump_times_;
  std::vector<double> dlambda_;
  std::vector<double> survival_after_;  // G at each jump
  std::vector<double> hazard_after_;    // Lambda at each jump
  double tau_ = 0.0;
};

CensoringModel fit_censoring_km(const Dataset& d);

/// IPCW responses y_i = delta_i x_i / G(x_i-).
struct SyntheticResponses {
  std::vector<double> y;
  /// Events whose G(x-) fell below kSurvivalFloor and had their weight capped.
  std::size_t truncated = 0;
};

SyntheticResponses synthetic_responses(std::span<const double> x,
                                       std::span<const std::uint8_t> delta,
                                       const CensoringModel& cm);
SyntheticResponses synthetic_responses(const Dataset& d, const CensoringModel& cm);

/// Integral of g against the censoring martingale of one observation:
///   (1 - delta) g(x) - sum_{s_m <= x} g(s_m) dLambda(s_m).
template <class Integrand>
double martingale_integral(double x, bool delta, Integrand&& g, const CensoringModel& cm) {
  const auto jumps = cm.jump_times();
  const auto dl = cm.hazard_increments();
  const std::size_t count = cm.jumps_at_or_before(x);
  double compensator = 0.0;
  for (std::size_t m = 0; m < count; ++m) compensator += g(jumps[m]) * dl[m];
  return (delta ? 0.0 : g(x)) - compensator;
}

}  // namespace hdmed

#include <memory>

namespace hdmed {

/// Full-sample censoring fit together with the IPCW responses it induces.
/// Shared by every prefix fit of one ordering.
struct CensoringFit {
  CensoringModel model;
  SyntheticResponses responses;
};

std::shared_ptr<const CensoringFit> fit_censoring(const Dataset& d);

}  // namespace hdmed
