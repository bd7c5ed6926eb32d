#include "hdmed/competing.hpp"

#include <algorithm>
#include <cmath>

#include "hdmed/error.hpp"
#include "hdmed/influence.hpp"
#include "hdmed/normal.hpp"
#include "hdmed/nuisance.hpp"
#include "hdmed/stabilized.hpp"

namespace hdmed {

namespace {

constexpr const char* kModule = "competing";

CompetitorResult full_sample_inference(const NuisanceSet& ns, std::size_t k, double alpha,
                                       double factor, CompetitorMethod method) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError(kModule, "alpha must lie in (0, 1)");
  const OneStepEstimate os = one_step(ns, k);
  if (!(os.sigma_hat >= kSigmaFloor)) {
    throw DegenerateVarianceError(kModule, "influence-function sd vanished").with_mediator(k);
  }
  const int sign = ns.psi()[k] < 0.0 ? -1 : 1;
  CompetitorResult r;
  r.method = method;
  r.k_used = k;
  r.alpha = alpha;
  r.sigma_hat = os.sigma_hat;
  r.se = os.sigma_hat / std::sqrt(static_cast<double>(os.n_eval));
  r.estimate = sign * os.psi_onestep;
  r.raw_p = two_sided_p_value(r.estimate / r.se);
  r.p_value = std::min(1.0, factor * r.raw_p);
  r.ci_level_alpha = alpha / factor;
  const double half = two_sided_critical(r.ci_level_alpha) * r.se;
  r.ci_low = r.estimate - half;
  r.ci_high = r.estimate + half;
  return r;
}

NuisanceSet full_fit(const Dataset& d, NuisanceOptions options) {
  d.require_positivity();
  return assemble_nuisance(d, d.n(), fit_censoring(d), options);
}

CompetitorResult selected(const Dataset& d, double alpha, NuisanceOptions options, bool corrected) {
  const NuisanceSet ns = full_fit(d, options);
  const std::size_t k = select_mediator(ns.psi()).first;
  return full_sample_inference(ns, k, alpha, corrected ? static_cast<double>(d.p()) : 1.0,
                               corrected ? CompetitorMethod::bonferroni : CompetitorMethod::naive);
}

}  // namespace

CompetitorResult bonferroni_one_step(const Dataset& d, double alpha, NuisanceOptions options) {
  return selected(d, alpha, options, true);
}

CompetitorResult naive_one_step(const Dataset& d, double alpha, NuisanceOptions options) {
  return selected(d, alpha, options, false);
}

CompetitorResult oracle_one_step(const Dataset& d, std::size_t k, double alpha, NuisanceOptions options) {
  if (k >= d.p()) throw IndexError(kModule, "mediator index out of range");
  const NuisanceSet ns = full_fit(d, options);
  return full_sample_inference(ns, k, alpha, 1.0, CompetitorMethod::oracle);
}

std::string to_string(CompetitorMethod method) {
  switch (method) {
    case CompetitorMethod::bonferroni: return "bonferroni";
    case CompetitorMethod::naive: return "naive";
    case CompetitorMethod::oracle: return "oracle";
  }
  return "oracle";
}

}  // namespace hdmed
