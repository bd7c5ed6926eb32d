#include "hdmed/stabilized.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hdmed/error.hpp"
#include "hdmed/influence.hpp"
#include "hdmed/normal.hpp"
#include "hdmed/parallel.hpp"
#include "hdmed/rng.hpp"

namespace hdmed {

namespace {
constexpr const char* kModule = "stabilized";
}

double StabilizedEstimate::se() const {
  return sigma_bar / std::sqrt(static_cast<double>(n - qn));
}

double StabilizedEstimate::z() const {
  return std::sqrt(static_cast<double>(n - qn)) * s_star / sigma_bar;
}

std::pair<std::size_t, int> select_mediator(std::span<const double> psi) {
  if (psi.empty()) throw IndexError(kModule, "no mediators to select from");
  std::size_t best = 0;
  for (std::size_t k = 1; k < psi.size(); ++k) {
    if (std::abs(psi[k]) > std::abs(psi[best])) best = k;
  }
  return {best, psi[best] < 0.0 ? -1 : 1};
}

Inference ci_pvalue(double s_star, double sigma_bar, std::size_t n, std::size_t qn, double alpha) {
  const double root = std::sqrt(static_cast<double>(n - qn));
  const double half = two_sided_critical(alpha) * sigma_bar / root;
  return Inference{s_star - half, s_star + half, two_sided_p_value(root * s_star / sigma_bar)};
}

Inference ci_pvalue(const StabilizedEstimate& est, double alpha) {
  return ci_pvalue(est.s_star, est.sigma_bar, est.n, est.qn, alpha);
}

StabilizedEstimate combine_steps(std::vector<StepRecord> steps, std::size_t n, std::size_t qn,
                                 double alpha) {
  if (qn == 0 || qn >= n) throw DomainError(kModule, "qn must satisfy 1 <= qn < n");
  if (steps.size() != n - qn) throw DomainError(kModule, "expected one step per prefix length");
  const double count = static_cast<double>(n - qn);
  double inverse_sum = 0.0;
  for (const auto& s : steps) {
    if (!(s.sigma_hat >= kSigmaFloor)) {
      throw DegenerateVarianceError(kModule, "influence-function sd vanished at prefix length " +
                                                 std::to_string(s.j))
          .with_mediator(s.k);
    }
    inverse_sum += 1.0 / s.sigma_hat;
  }
  StabilizedEstimate est;
  est.n = n;
  est.qn = qn;
  est.alpha = alpha;
  est.sigma_bar = count / inverse_sum;
  double total = 0.0;
  for (auto& s : steps) {
    s.weight = est.sigma_bar / s.sigma_hat;
    s.contribution = s.weight * s.m * s.s_value;
    total += s.contribution;
  }
  est.s_star = total / count;
  const Inference inf = ci_pvalue(est, alpha);
  est.ci_low = inf.ci_low;
  est.ci_high = inf.ci_high;
  est.p_value = inf.p_value;
  est.trace = std::move(steps);
  return est;
}

std::size_t default_qn(std::size_t n) {
  if (n < 2) throw DomainError(kModule, "need at least two observations");
  const auto qn = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  return std::clamp<std::size_t>(qn, 1, n - 1);
}

StabilizedEstimate stabilized_one_step(const Dataset& ordered, std::size_t qn,
                                       const StabilizedConfig& config) {
  const std::size_t n = ordered.n();
  if (qn == 0 || qn >= n) throw DomainError(kModule, "qn must satisfy 1 <= qn < n");
  if (!ordered.has_both_exposure_levels(qn)) {
    throw PositivityError(kModule, "the first qn rows contain a single exposure level; "
                                   "use a different ordering or a larger qn");
  }
  const NuisanceOptions options{config.adjust_for_z, config.cond_mean};
  const auto censoring = fit_censoring(ordered);
  std::vector<StepRecord> steps;
  steps.reserve(n - qn);
  std::size_t fallbacks = 0;

  if (config.scope == NuisanceScope::appendix) {
    PrefixMoments moments(ordered, censoring->responses.y, config.adjust_for_z);
    for (std::size_t j = qn; j < n; ++j) {
      moments.advance_to(j);
      const NuisanceSet ns(ordered, censoring, moments, options);
      const auto [k, m] = select_mediator(ns.psi());
      const auto values = f_star_values(ns, k, RowRange{0, j + 1});
      StepRecord s;
      s.j = j;
      s.k = k;
      s.m = m;
      s.psi = ns.psi()[k];
      s.f_star_next = values[j];
      s.s_value = s.psi + s.f_star_next;
      s.sigma_hat = population_sd(std::span<const double>(values).first(j));
      fallbacks += ns.mediator(k).treated_path.fallback_count;
      steps.push_back(s);
    }
  } else {
    const NuisanceSet ns = assemble_nuisance(ordered, n, censoring, options);
    const auto [k, m] = select_mediator(ns.psi());
    const auto values = f_star_values(ns, k, RowRange{0, n});
    fallbacks = ns.mediator(k).treated_path.fallback_count;
    for (std::size_t j = qn; j < n; ++j) {
      StepRecord s;
      s.j = j;
      s.k = k;
      s.m = m;
      s.psi = ns.psi()[k];
      s.f_star_next = values[j];
      s.s_value = s.psi + s.f_star_next;
      s.sigma_hat = population_sd(std::span<const double>(values).first(j));
      steps.push_back(s);
    }
  }
  StabilizedEstimate est = combine_steps(std::move(steps), n, qn, config.alpha);
  est.truncated_weights = censoring->responses.truncated;
  est.fallback_fits = fallbacks;
  return est;
}

std::vector<std::size_t> checkpoint_lengths(std::size_t n, std::size_t qn, std::size_t count) {
  std::vector<std::size_t> out;
  if (count == 0 || qn >= n) return out;
  const std::size_t span = n - 1 - qn;
  for (std::size_t c = 0; c < count; ++c) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(c) / static_cast<double>(count - 1);
    out.push_back(qn + static_cast<std::size_t>(std::llround(frac * static_cast<double>(span))));
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const StabilizedEstimate& OrderingEnsemble::reported_estimate() const {
  return *results.at(reported).estimate;
}

OrderingEnsemble multi_ordering_analysis(const Dataset& d, std::size_t orderings, std::size_t qn,
                                         double alpha, std::uint64_t seed,
                                         const StabilizedConfig& config, std::size_t threads) {
  if (orderings == 0) throw DomainError(kModule, "need at least one ordering");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError(kModule, "alpha must lie in (0, 1)");
  StabilizedConfig cfg = config;
  cfg.alpha = alpha;

  OrderingEnsemble ens;
  ens.orderings = orderings;
  ens.alpha = alpha;
  ens.results.resize(orderings);
  parallel_for(orderings, threads, [&](std::size_t m) {
    OrderingResult& r = ens.results[m];
    r.index = m;
    r.seed = derive_seed(seed, m);
    for (int attempt = 0; attempt < 2; ++attempt) {
      try {
        Dataset ordered = random_ordering(d, r.seed);
        r.estimate = stabilized_one_step(ordered, qn, cfg);
        r.estimate->ordering_seed = r.seed;
        r.failure.clear();
        return;
      } catch (PositivityError& e) {
        r.failure = e.what();
        if (attempt == 0) {
          r.retried = true;
          r.seed = derive_seed(r.seed, 1);
        }
      } catch (Error& e) {
        e.with_ordering(m);
        throw;
      }
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t m = 0; m < orderings; ++m) {
    const auto& r = ens.results[m];
    if (!r.estimate) continue;
    if (!best || r.estimate->p_value < ens.results[*best].estimate->p_value) best = m;
  }
  if (!best) {
    throw PositivityError(kModule, "every ordering failed the prefix positivity check");
  }
  ens.reported = *best;
  const StabilizedEstimate& rep = ens.reported_estimate();
  ens.combined_p = std::min(1.0, static_cast<double>(orderings) * rep.p_value);
  const Inference wide = ci_pvalue(rep, alpha / static_cast<double>(orderings));
  ens.combined_ci_low = wide.ci_low;
  ens.combined_ci_high = wide.ci_high;

  std::map<std::size_t, std::size_t> counts;
  for (std::size_t j : checkpoint_lengths(rep.n, rep.qn, cfg.checkpoints)) {
    counts[rep.trace[j - rep.qn].k] += 1;
  }
  ens.checkpoint_selection.assign(counts.begin(), counts.end());
  std::stable_sort(ens.checkpoint_selection.begin(), ens.checkpoint_selection.end(),
                   [](const auto& l, const auto& r) { return l.second > r.second; });
  return ens;
}

std::string to_string(NuisanceScope scope) {
  return scope == NuisanceScope::appendix ? "appendix" : "full";
}

NuisanceScope parse_nuisance_scope(const std::string& name) {
  if (name == "appendix") return NuisanceScope::appendix;
  if (name == "full") return NuisanceScope::full;
  throw DomainError(kModule, "unknown nuisance scope '" + name + "'");
}

}  // namespace hdmed
