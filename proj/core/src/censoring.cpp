#include "hdmed/censoring.hpp"

#include <numeric>

#include "hdmed/dataset.hpp"
#include "hdmed/error.hpp"

namespace hdmed {

CensoringModel CensoringModel::fit(std::span<const double> x, std::span<const std::uint8_t> delta) {
  const std::size_t n = x.size();
  if (n == 0) throw DomainError("censoring", "cannot fit censoring distribution to an empty sample");
  if (delta.size() != n) throw SchemaError("censoring", "time and status lengths differ");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return x[l] < x[r]; });

  CensoringModel cm;
  cm.tau_ = x[order.back()];
  double g = 1.0;
  double lambda = 0.0;
  std::size_t pos = 0;
  while (pos < n) {
    const double s = x[order[pos]];
    const std::size_t at_risk = n - pos;
    std::size_t censored = 0;
    std::size_t stop = pos;
    while (stop < n && x[order[stop]] == s) {
      if (!delta[order[stop]]) ++censored;
      ++stop;
    }
    if (censored > 0) {
      const double hazard = static_cast<double>(censored) / static_cast<double>(at_risk);
      g *= 1.0 - hazard;
      lambda += hazard;
      cm.jump_times_.push_back(s);
      cm.dlambda_.push_back(hazard);
      cm.survival_after_.push_back(g);
      cm.hazard_after_.push_back(lambda);
    }
    pos = stop;
  }
  return cm;
}

double CensoringModel::survival(double s) const {
  const std::size_t m = jumps_at_or_before(s);
  return m == 0 ? 1.0 : survival_after_[m - 1];
}

double CensoringModel::survival_left(double s) const {
  const auto m = static_cast<std::size_t>(
      std::lower_bound(jump_times_.begin(), jump_times_.end(), s) - jump_times_.begin());
  return m == 0 ? 1.0 : survival_after_[m - 1];
}

double CensoringModel::cumulative_hazard(double s) const {
  const std::size_t m = jumps_at_or_before(s);
  return m == 0 ? 0.0 : hazard_after_[m - 1];
}

CensoringModel fit_censoring_km(const Dataset& d) { return CensoringModel::fit(d.x(), d.delta()); }

SyntheticResponses synthetic_responses(std::span<const double> x,
                                       std::span<const std::uint8_t> delta,
                                       const CensoringModel& cm) {
  SyntheticResponses out;
  out.y.assign(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!delta[i]) continue;
    double g = cm.survival_left(x[i]);
    if (g < kSurvivalFloor) {
      g = kSurvivalFloor;
      ++out.truncated;
    }
    out.y[i] = x[i] / g;
  }
  return out;
}

SyntheticResponses synthetic_responses(const Dataset& d, const CensoringModel& cm) {
  return synthetic_responses(d.x(), d.delta(), cm);
}

}  // namespace hdmed

namespace hdmed {

std::shared_ptr<const CensoringFit> fit_censoring(const Dataset& d) {
  auto fit = std::make_shared<CensoringFit>();
  fit->model = fit_censoring_km(d);
  fit->responses = synthetic_responses(d, fit->model);
  return fit;
}

}  // namespace hdmed
