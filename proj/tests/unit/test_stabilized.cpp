#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "hdmed/error.hpp"
#include "hdmed/rng.hpp"
#include "hdmed/simulation.hpp"
#include "hdmed/stabilized.hpp"
#include "oracles.hpp"
#include "reference.hpp"

using namespace hdmed;

TEST(SelectMediator, LargestMagnitude) {
  const std::vector<double> psi{0.1, -0.3, 0.2};
  EXPECT_EQ(select_mediator(psi), (std::pair<std::size_t, int>{1, -1}));
}

TEST(SelectMediator, TiesGoToSmallestIndex) {
  const std::vector<double> psi{0.2, -0.2};
  EXPECT_EQ(select_mediator(psi), (std::pair<std::size_t, int>{0, 1}));
}

TEST(SelectMediator, SingleMediatorAndZero) {
  EXPECT_EQ(select_mediator(std::vector<double>{-0.4}), (std::pair<std::size_t, int>{0, -1}));
  EXPECT_EQ(select_mediator(std::vector<double>{0.0}), (std::pair<std::size_t, int>{0, 1}));
  EXPECT_THROW(select_mediator(std::vector<double>{}), IndexError);
}

TEST(CombineSteps, ConstantPathCollapses) {
  std::vector<StepRecord> steps;
  for (std::size_t j = 8; j < 12; ++j) {
    StepRecord s;
    s.j = j;
    s.s_value = 0.37;
    s.psi = 0.37;
    s.sigma_hat = 2.0;
    steps.push_back(s);
  }
  const auto est = combine_steps(steps, 12, 8, 0.1);
  EXPECT_DOUBLE_EQ(est.s_star, 0.37);
  EXPECT_DOUBLE_EQ(est.sigma_bar, 2.0);
  for (const auto& s : est.trace) EXPECT_EQ(s.weight, 1.0);
}

TEST(CombineSteps, DegenerateVarianceAborts) {
  std::vector<StepRecord> steps(2);
  steps[0].sigma_hat = 1.0;
  steps[1].sigma_hat = 1e-12;
  EXPECT_THROW(combine_steps(steps, 10, 8, 0.1), DegenerateVarianceError);
}

TEST(CiPvalue, ZeroEstimate) {
  const auto inf = ci_pvalue(0.0, 1.3, 100, 80, 0.1);
  EXPECT_DOUBLE_EQ(inf.p_value, 1.0);
  EXPECT_NEAR(inf.ci_low, -inf.ci_high, 1e-15);
}

TEST(CiPvalue, StatisticAtNinetyPercentCritical) {
  // sqrt(n - qn) s / sigma = 1.645 with n - qn = 100
  const auto inf = ci_pvalue(0.1645, 1.0, 180, 80, 0.1);
  EXPECT_NEAR(inf.p_value, 2.0 * (1.0 - oracle::phi(1.645)), 1e-12);
  EXPECT_NEAR(inf.p_value, 0.0999, 1e-4);
}

TEST(CiPvalue, IntervalAtAlphaPointOne) {
  // sigma_bar / sqrt(n - qn) = 1
  const auto inf = ci_pvalue(2.0, 3.0, 19, 10, 0.1);
  const double z = oracle::phi_inv(0.95);
  EXPECT_NEAR(z, 1.6449, 1e-4);
  EXPECT_NEAR(inf.ci_low, 2.0 - z, 1e-10);
  EXPECT_NEAR(inf.ci_high, 2.0 + z, 1e-10);
}

TEST(Stabilized, MatchesReferenceAtForty) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset d = gen::dataset(seed, {.n = 40, .p = 3, .censor_prob = 0.3, .signal = 0.8});
    StabilizedConfig cfg;
    const auto est = stabilized_one_step(d, 32, cfg);
    const auto r = ref::stabilized(ref::from_dataset(d), 32);
    ASSERT_EQ(est.trace.size(), r.steps.size());
    for (std::size_t t = 0; t < r.steps.size(); ++t) {
      EXPECT_EQ(est.trace[t].k, r.steps[t].k);
      EXPECT_EQ(est.trace[t].m, r.steps[t].m);
      EXPECT_NEAR(est.trace[t].sigma_hat, r.steps[t].sigma, 1e-9);
      EXPECT_NEAR(est.trace[t].contribution, r.steps[t].contribution, 1e-9);
    }
    EXPECT_NEAR(est.s_star, r.s_star, 1e-9);
    EXPECT_NEAR(est.sigma_bar, r.sigma_bar, 1e-9);
  }
}

TEST(Stabilized, InferenceIdentitiesHoldExactly) {
  const Dataset d = gen::dataset(21, {.n = 100, .p = 4});
  const auto est = stabilized_one_step(d, 80, {});
  const double root = std::sqrt(20.0);
  const double half = oracle::phi_inv(0.95) * est.sigma_bar / root;
  EXPECT_NEAR(est.ci_low, est.s_star - half, 1e-12);
  EXPECT_NEAR(est.ci_high, est.s_star + half, 1e-12);
  EXPECT_NEAR(est.p_value, 2.0 * (1.0 - oracle::phi(std::abs(root * est.s_star / est.sigma_bar))), 1e-12);
  double inv = 0.0;
  for (const auto& s : est.trace) {
    inv += 1.0 / s.sigma_hat;
    EXPECT_TRUE(s.m == 1 || s.m == -1);
  }
  EXPECT_NEAR(inv / 20.0, 1.0 / est.sigma_bar, 1e-12);
}

TEST(Stabilized, SingleMediatorAlwaysSelected) {
  const Dataset d = gen::dataset(22, {.n = 60, .p = 1});
  for (const auto& s : stabilized_one_step(d, 45, {}).trace) EXPECT_EQ(s.k, 0u);
}

TEST(Stabilized, RejectsBadPrefix) {
  const Dataset d = gen::dataset(23, {.n = 30, .p = 2});
  EXPECT_THROW(stabilized_one_step(d, 0, {}), DomainError);
  EXPECT_THROW(stabilized_one_step(d, 30, {}), DomainError);
  RowMatrix b(4, 1);
  b << 1, 2, 3, 4;
  const Dataset flat({0, 1, 2, 3}, {1, 1, 1, 1}, {1, 1, 0, 0}, b);
  EXPECT_THROW(stabilized_one_step(flat, 2, {}), PositivityError);
}

TEST(Stabilized, FullScopeUsesOneFit) {
  const Dataset d = gen::dataset(24, {.n = 80, .p = 3});
  StabilizedConfig cfg;
  cfg.scope = NuisanceScope::full;
  const auto est = stabilized_one_step(d, 64, cfg);
  for (const auto& s : est.trace) {
    EXPECT_EQ(s.k, est.trace[0].k);
    EXPECT_EQ(s.psi, est.trace[0].psi);
  }
}

TEST(Stabilized, DefaultQnIsEightyPercent) {
  EXPECT_EQ(default_qn(800), 640u);
  EXPECT_EQ(default_qn(2), 1u);
  EXPECT_THROW(default_qn(1), DomainError);
}

TEST(Ensemble, SingleOrderingIsUncorrected) {
  const Dataset d = gen::dataset(25, {.n = 80, .p = 3, .signal = 1.0});
  const auto ens = multi_ordering_analysis(d, 1, 64, 0.1, 5, {});
  const auto& rep = ens.reported_estimate();
  EXPECT_EQ(ens.combined_p, rep.p_value);
  EXPECT_EQ(ens.combined_ci_low, rep.ci_low);
  EXPECT_EQ(ens.combined_ci_high, rep.ci_high);
  EXPECT_EQ(rep.ordering_seed, derive_seed(5, 0));
}

TEST(Ensemble, HundredOrderingsTightenLevel) {
  const Dataset d = gen::dataset(26, {.n = 60, .p = 2, .signal = 1.0});
  const auto ens = multi_ordering_analysis(d, 100, 48, 0.1, 9, {});
  const auto& rep = ens.reported_estimate();
  const auto wide = ci_pvalue(rep, 0.001);
  EXPECT_EQ(ens.combined_ci_low, wide.ci_low);
  EXPECT_EQ(ens.combined_ci_high, wide.ci_high);
  double min_p = 1.0;
  for (const auto& r : ens.results) min_p = std::min(min_p, r.estimate->p_value);
  EXPECT_EQ(rep.p_value, min_p);
  EXPECT_EQ(ens.combined_p, std::min(1.0, 100.0 * min_p));
  EXPECT_GE(ens.combined_p, min_p);
  EXPECT_LE(ens.combined_ci_low, rep.s_star);
  EXPECT_GE(ens.combined_ci_high, rep.s_star);
  std::size_t counted = 0;
  for (const auto& [k, c] : ens.checkpoint_selection) counted += c;
  EXPECT_EQ(counted, 5u);
}

TEST(Ensemble, DeterministicAcrossThreadCounts) {
  const Dataset d = gen::dataset(27, {.n = 70, .p = 4});
  const auto one = multi_ordering_analysis(d, 6, 56, 0.1, 3, {}, 1);
  const auto four = multi_ordering_analysis(d, 6, 56, 0.1, 3, {}, 4);
  for (std::size_t m = 0; m < 6; ++m) {
    EXPECT_EQ(one.results[m].estimate->s_star, four.results[m].estimate->s_star);
    EXPECT_EQ(one.results[m].estimate->sigma_bar, four.results[m].estimate->sigma_bar);
  }
  EXPECT_EQ(one.combined_p, four.combined_p);
}

TEST(Ensemble, PositivityFailureIsRetriedThenRecorded) {
  const Dataset base = gen::dataset(28, {.n = 40, .p = 2});
  std::vector<std::uint8_t> a(40, 0);
  for (std::size_t i : {3u, 11u, 25u, 37u}) a[i] = 1;
  const Dataset d(std::vector<double>(base.x().begin(), base.x().end()),
                  std::vector<std::uint8_t>(base.delta().begin(), base.delta().end()), a,
                  base.mediators());
  // Four treated rows in forty: a prefix of ten misses all of them about 30%
  // of the time. Predict which orderings fail from the permutations themselves.
  constexpr std::size_t qn = 10;
  auto ok = [&](std::uint64_t seed) { return random_ordering(d, seed).has_both_exposure_levels(qn); };
  const auto ens = multi_ordering_analysis(d, 60, qn, 0.1, 1, {});
  std::size_t retried = 0, failed = 0;
  for (std::size_t m = 0; m < 60; ++m) {
    const auto& r = ens.results[m];
    const std::uint64_t first = derive_seed(1, m);
    EXPECT_EQ(r.retried, !ok(first)) << "ordering " << m;
    const bool expect_estimate = ok(first) || ok(derive_seed(first, 1));
    EXPECT_EQ(r.estimate.has_value(), expect_estimate) << "ordering " << m << ": " << r.failure;
    if (!expect_estimate) EXPECT_FALSE(r.failure.empty());
    retried += r.retried;
    failed += !expect_estimate;
  }
  EXPECT_GT(retried, 0u);
  EXPECT_GT(failed, 0u);
}

TEST(Ensemble, CheckpointsEvenlySpaced) {
  EXPECT_EQ(checkpoint_lengths(800, 640, 5), (std::vector<std::size_t>{640, 680, 720, 759, 799}));
  EXPECT_EQ(checkpoint_lengths(10, 8, 5), (std::vector<std::size_t>{8, 9}));
}

TEST(Ensemble, ModelZeroFamilywiseErrorControlled) {
  SimulationSpec spec;
  spec.p = 100;
  const double rate = calibrate_censoring_rate(spec, spec.censor_target, 1);
  // Simulation studies use the full-sample nuisance fit.
  StabilizedConfig cfg;
  cfg.scope = NuisanceScope::full;
  const int reps = 300;
  int rejected = 0;
  for (int r = 0; r < reps; ++r) {
    const Dataset raw = generate(spec, derive_seed(31, static_cast<std::uint64_t>(r)), rate);
    const Dataset d = standardize_mediators(raw, Standardization::normal_score);
    const auto ens = multi_ordering_analysis(d, 10, 640, 0.1, derive_seed(32, static_cast<std::uint64_t>(r)), cfg);
    rejected += ens.combined_p < 0.1;
  }
  EXPECT_LE(static_cast<double>(rejected) / reps, 0.13);
}
