#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "hdmed/competing.hpp"
#include "hdmed/error.hpp"
#include "hdmed/influence.hpp"
#include "hdmed/rng.hpp"
#include "hdmed/simulation.hpp"
#include "oracles.hpp"

using namespace hdmed;

TEST(Competing, SingleMediatorBonferroniIsOracle) {
  const Dataset d = gen::dataset(40, {.n = 120, .p = 1, .signal = 1.0});
  const auto b = bonferroni_one_step(d, 0.1);
  const auto o = oracle_one_step(d, 0, 0.1);
  EXPECT_EQ(b.k_used, 0u);
  EXPECT_EQ(b.estimate, o.estimate);
  EXPECT_EQ(b.p_value, o.p_value);
  EXPECT_EQ(b.ci_low, o.ci_low);
  EXPECT_EQ(b.ci_high, o.ci_high);
}

TEST(Competing, BonferroniScalesPAndLevel) {
  const Dataset d = gen::dataset(41, {.n = 150, .p = 6, .signal = 0.7});
  const auto b = bonferroni_one_step(d, 0.1);
  const auto n = naive_one_step(d, 0.1);
  EXPECT_EQ(b.k_used, n.k_used);
  EXPECT_EQ(b.estimate, n.estimate);
  EXPECT_EQ(b.raw_p, n.p_value);
  EXPECT_DOUBLE_EQ(b.p_value, std::min(1.0, 6.0 * n.p_value));
  EXPECT_DOUBLE_EQ(b.ci_level_alpha, 0.1 / 6.0);
  const double half = oracle::phi_inv(1.0 - 0.1 / 12.0) * b.se;
  EXPECT_NEAR(b.ci_high - b.estimate, half, 1e-10);
  EXPECT_GT(b.ci_high - b.ci_low, n.ci_high - n.ci_low);
}

TEST(Competing, EstimateIsSignedOneStep) {
  const Dataset d = gen::dataset(42, {.n = 100, .p = 3, .signal = -0.9});
  const auto ns = assemble_nuisance(d, d.n(), fit_censoring(d));
  for (std::size_t k = 0; k < 3; ++k) {
    const auto o = oracle_one_step(d, k, 0.05);
    const auto os = one_step(ns, k);
    const double sign = ns.psi()[k] < 0 ? -1.0 : 1.0;
    EXPECT_DOUBLE_EQ(o.estimate, sign * os.psi_onestep);
    EXPECT_DOUBLE_EQ(o.se, os.sigma_hat / std::sqrt(100.0));
    EXPECT_NEAR(o.p_value, 2.0 * (1.0 - oracle::phi(std::abs(o.estimate / o.se))), 1e-12);
  }
}

TEST(Competing, Errors) {
  const Dataset d = gen::dataset(43, {.n = 40, .p = 2});
  EXPECT_THROW(oracle_one_step(d, 2, 0.1), IndexError);
  EXPECT_THROW(bonferroni_one_step(d, 1.5), DomainError);
  RowMatrix b(3, 1);
  b << 1, 2, 3;
  const Dataset one({0, 1, 2}, {1, 1, 1}, {1, 1, 1}, b);
  EXPECT_THROW(naive_one_step(one, 0.1), PositivityError);
}

TEST(Competing, ExtendedOptionChangesOnlyWithConfounders) {
  const Dataset d = gen::dataset(44, {.n = 100, .p = 3});
  const auto plain = oracle_one_step(d, 0, 0.1);
  const auto ext = oracle_one_step(d, 0, 0.1, {.adjust_for_z = true});
  EXPECT_EQ(plain.estimate, ext.estimate);
}

TEST(Competing, BonferroniConservativeUnderModelZero) {
  SimulationSpec spec;
  spec.p = 100;
  StudyConfig cfg;
  cfg.methods = {Method::bonferroni};
  cfg.reps = 500;
  const auto report = run_coverage_study(spec, cfg);
  EXPECT_LE(report.row(Method::bonferroni, 100).rejection_rate, 0.1);
}

TEST(Competing, OracleOverCoversUnderModelZero) {
  SimulationSpec spec;
  spec.p = 100;
  StudyConfig cfg;
  cfg.methods = {Method::oracle};
  cfg.oracle_k = 0;
  cfg.reps = 500;
  const auto report = run_coverage_study(spec, cfg);
  EXPECT_GE(report.row(Method::oracle, 100).coverage, 0.9 - 0.035);
}
