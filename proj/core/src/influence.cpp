#include "hdmed/influence.hpp"

#include <cmath>
#include <numeric>

#include "hdmed/error.hpp"

namespace hdmed {

namespace {

double censoring_integral(const Observation& obs, const NuisanceSet& ns, std::size_t k,
                          const MediatorNuisance& med) {
  const CensoringModel& cm = ns.censoring().model;
  const CondMeanPath& path = med.treated_path;
  const double b = obs.b[k];
  const std::size_t idx = cm.jumps_at_or_before(obs.x);
  double compensator = 0.0;
  if (path.clamped) {
    const auto dl = cm.hazard_increments();
    for (std::size_t m = 0; m < idx; ++m) compensator += path.value(m, b) * dl[m];
  } else {
    compensator = path.cum_intercept[idx] + b * path.cum_slope[idx];
  }
  if (obs.delta) return -compensator;
  double own;
  if (idx > 0 && cm.jump_times()[idx - 1] == obs.x) {
    own = path.value(idx - 1, b);
  } else {
    // Censored at a time the censoring fit never saw; fit the risk set directly.
    own = fit_conditional_mean_regression(ns.data(), ns.prefix_length(), k, true, obs.x, ns.y(),
                                          ns.options().cond_mean)(b);
  }
  return own - compensator;
}

}  // namespace

double eval_f(const Observation& obs, double y, const NuisanceSet& ns, std::size_t k) {
  const MediatorNuisance& med = ns.mediator(k);
  const ExposureProb& ex = ns.exposure();
  const double b = obs.b[k];
  const double beta = ns.beta()[k];
  const double e1 = med.treated_mean(b);
  if (!obs.a) return -(e1 - beta * ns.q0()[k]) / ex.p0;
  const double odds = med.recip_odds.recip_odds(b) * (ex.p1 / ex.p0);
  return (y - beta * ns.q1()[k] - odds * (y - e1)) / ex.p1;
}

double eval_f_car(const Observation& obs, const NuisanceSet& ns, std::size_t k) {
  if (!obs.a) return 0.0;
  const MediatorNuisance& med = ns.mediator(k);
  const ExposureProb& ex = ns.exposure();
  const double odds = med.recip_odds.recip_odds(obs.b[k]) * (ex.p1 / ex.p0);
  return -(1.0 - odds) / ex.p1 * censoring_integral(obs, ns, k, med);
}

InfluenceValue eval_f_star(const Observation& obs, double y, const NuisanceSet& ns, std::size_t k) {
  InfluenceValue v;
  v.f = eval_f(obs, y, ns, k);
  v.f_car = eval_f_car(obs, ns, k);
  v.f_star = v.f - v.f_car;
  return v;
}

std::vector<double> f_star_values(const NuisanceSet& ns, std::size_t k, RowRange rows) {
  if (rows.begin > rows.end || rows.end > ns.data().n()) {
    throw DomainError("influence", "row range out of bounds");
  }
  std::vector<double> out;
  out.reserve(rows.end - rows.begin);
  const auto y = ns.y();
  for (std::size_t i = rows.begin; i < rows.end; ++i) {
    out.push_back(eval_f_star(ns.data().observation(i), y[i], ns, k).f_star);
  }
  return out;
}

double population_sd(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double count = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / count);
}

OneStepEstimate one_step(const NuisanceSet& ns, std::size_t k, RowRange rows) {
  if (k >= ns.p()) throw IndexError("influence", "mediator index out of range");
  if (rows.end <= rows.begin) throw DomainError("influence", "empty evaluation range");
  const auto values = f_star_values(ns, k, rows);
  OneStepEstimate est;
  est.k = k;
  est.n_eval = values.size();
  est.psi_plugin = ns.psi()[k];
  est.correction = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  est.psi_onestep = est.psi_plugin + est.correction;
  est.sigma_hat = population_sd(values);
  return est;
}

OneStepEstimate one_step(const NuisanceSet& ns, std::size_t k) {
  return one_step(ns, k, RowRange{0, ns.data().n()});
}

}  // namespace hdmed
