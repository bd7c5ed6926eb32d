#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "generators.hpp"
#include "hdmed/censoring.hpp"
#include "hdmed/error.hpp"
#include "hdmed/nuisance.hpp"
#include "hdmed/rng.hpp"
#include "hdmed/simulation.hpp"
#include "reference.hpp"

using namespace hdmed;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Dataset make(std::vector<double> x, std::vector<std::uint8_t> delta, std::vector<std::uint8_t> a,
             std::vector<std::vector<double>> cols) {
  const auto n = static_cast<Eigen::Index>(x.size());
  RowMatrix b(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    for (Eigen::Index i = 0; i < n; ++i) b(i, static_cast<Eigen::Index>(k)) = cols[k][static_cast<std::size_t>(i)];
  }
  return Dataset(std::move(x), std::move(delta), std::move(a), std::move(b));
}

std::vector<double> ones_y(const Dataset& d) {
  return std::vector<double>(d.x().begin(), d.x().end());
}

}  // namespace

TEST(ExposureProb, Balanced) {
  const std::vector<std::uint8_t> a{0, 1, 0, 1};
  const auto e = fit_exposure_prob(a);
  EXPECT_EQ(e.p0, 0.5);
  EXPECT_EQ(e.p1, 0.5);
}

TEST(ExposureProb, ThreeQuarters) {
  const std::vector<std::uint8_t> a{1, 1, 1, 0};
  const auto e = fit_exposure_prob(a);
  EXPECT_DOUBLE_EQ(e.p0, 0.25);
  EXPECT_DOUBLE_EQ(e.p1, 0.75);
}

TEST(ExposureProb, SingleLevelIsPositivityError) {
  const std::vector<std::uint8_t> a{1, 1};
  EXPECT_THROW(fit_exposure_prob(a), PositivityError);
}

TEST(MediatorMeans, GroupMeans) {
  const Dataset d = make({0, 0, 0, 0}, {1, 1, 1, 1}, {0, 0, 1, 1}, {{1, 2, 3, 4}});
  const auto m = fit_conditional_mediator_means(d, 4, 0);
  EXPECT_DOUBLE_EQ(m.q0, 1.5);
  EXPECT_DOUBLE_EQ(m.q1, 3.5);
  EXPECT_DOUBLE_EQ(m.zeta, 2.0);
}

TEST(MediatorMeans, IdenticalGroups) {
  const Dataset d = make({0, 0, 0, 0}, {1, 1, 1, 1}, {0, 0, 1, 1}, {{1, 3, 3, 1}});
  EXPECT_EQ(fit_conditional_mediator_means(d, 4, 0).zeta, 0.0);
}

TEST(MediatorMeans, ModelOneZetaAveragesToOne) {
  SimulationSpec spec;
  spec.model = Model::M1;
  spec.p = 12;
  double total = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const Dataset d = generate(spec, derive_seed(2024, static_cast<std::uint64_t>(r)), 0.0);
    total += fit_conditional_mediator_means(d, d.n(), 0).zeta;
  }
  EXPECT_NEAR(total / reps, 1.0, 0.1);
}

TEST(KsvSlope, OrthogonalDesignReducesToOls) {
  const Dataset d = make({0, 0, 1, 1}, {1, 1, 1, 1}, {0, 1, 0, 1}, {{0, 0, 1, 1}});
  EXPECT_NEAR(fit_ksv_slope(d, 4, 0, ones_y(d)), 1.0, 1e-14);
}

TEST(KsvSlope, ConstantResponse) {
  const Dataset d = make({0, 0, 1, 1}, {1, 1, 1, 1}, {0, 1, 0, 1}, {{0.3, -1, 2, 1}});
  const std::vector<double> y(4, 3.0);
  EXPECT_NEAR(fit_ksv_slope(d, 4, 0, y), 0.0, 1e-14);
}

TEST(KsvSlope, CensoredSixRowsMatchesBruteForce) {
  const Dataset d = make({1.0, 2.0, 3.0, 1.5, 2.5, 0.5}, {1, 0, 1, 1, 0, 1}, {0, 1, 1, 0, 1, 0},
                         {{0.2, -0.4, 1.1, 0.7, -1.3, 0.5}});
  const auto cm = fit_censoring_km(d);
  const auto y = synthetic_responses(d, cm).y;
  // Hand product-limit: censorings at 2.0 (3 at risk) and 2.5 (2 at risk).
  EXPECT_DOUBLE_EQ(cm.survival(2.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(cm.survival(2.5), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(y[2], 9.0);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < d.n(); ++i) rows.push_back({1.0, double(d.exposure()[i]), d.mediator(i, 0)});
  const auto coef = gen::normal_equations(rows, y);
  EXPECT_NEAR(fit_ksv_slope(d, d.n(), 0, y), coef[2], 1e-10);
}

TEST(KsvSlope, CollinearNamesMediator) {
  const Dataset d = make({0, 0, 1, 1}, {1, 1, 1, 1}, {0, 1, 0, 1}, {{0, 1, 0, 1}});
  try {
    fit_ksv_slope(d, 4, 0, ones_y(d));
    FAIL();
  } catch (const CollinearityError& e) {
    EXPECT_EQ(e.mediator(), std::optional<std::size_t>(0));
  }
}

TEST(ReciprocalOdds, BalancedDesignIsZero) {
  const Dataset d = make({0, 0, 0, 0}, {1, 1, 1, 1}, {0, 0, 1, 1}, {{-1, 1, -1, 1}});
  const auto f = fit_reciprocal_odds(d, 4, 0);
  EXPECT_NEAR(f.theta0, 0.0, 1e-12);
  EXPECT_NEAR(f.theta1, 0.0, 1e-12);
  EXPECT_NEAR(f.recip_odds(0.7), 1.0, 1e-12);
  EXPECT_FALSE(f.separated);
}

TEST(ReciprocalOdds, IndependentMediatorNearOne) {
  const Dataset d = gen::dataset(5, {.n = 400, .p = 2, .signal = 0.0});
  const auto f = fit_reciprocal_odds(d, d.n(), 1);
  EXPECT_LT(std::abs(f.theta1), 0.3);
}

TEST(ReciprocalOdds, SeparationIsClipped) {
  const Dataset d = make({0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1}, {0, 0, 0, 1, 1, 1},
                         {{-3, -2, -1, 1, 2, 3}});
  const auto f = fit_reciprocal_odds(d, 6, 0);
  EXPECT_TRUE(f.separated);
  EXPECT_EQ(std::abs(f.theta1), kSeparationBound);
  EXPECT_LE(std::abs(f.theta0), kSeparationBound);
}

TEST(ReciprocalOdds, MatchesReferenceMle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = gen::dataset(seed, {.n = 70, .p = 2, .signal = 1.0});
    const auto f = fit_reciprocal_odds(d, d.n(), 0);
    double t0, t1;
    ref::logistic(ref::from_dataset(d), d.n(), 0, t0, t1);
    EXPECT_NEAR(f.theta0, t0, 1e-9);
    EXPECT_NEAR(f.theta1, t1, 1e-9);
  }
}

TEST(ConditionalMean, MaskedMomentsMatchBruteForce) {
  // Treated rows satisfy y = 2b + 1 exactly; controls carry other values.
  const Dataset d = make({1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 1, 1}, {1, 0, 1, 1, 0, 1},
                         {{0.5, 3.0, -1.0, 2.0, 0.1, 1.5}});
  std::vector<double> y{2.0, 9.0, -1.0, 5.0, 4.0, 4.0};
  const auto fit = fit_conditional_mean_regression(d, 6, 0, true, kNegInf, y, ConditionalMeanForm::masked);
  const auto oracle = ref::masked_mean(ref::from_dataset(d), 6, 0, true, kNegInf, y);
  EXPECT_NEAR(fit.intercept, oracle.intercept, 1e-12);
  EXPECT_NEAR(fit.slope, oracle.slope, 1e-12);
  EXPECT_FALSE(fit.fallback);
}

TEST(ConditionalMean, SubsampleRecoversExactLine) {
  const Dataset d = make({1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 1, 1}, {1, 0, 1, 1, 0, 1},
                         {{0.5, 3.0, -1.0, 2.0, 0.1, 1.5}});
  std::vector<double> y{2.0, 9.0, -1.0, 5.0, 4.0, 4.0};
  const auto fit = fit_conditional_mean_regression(d, 6, 0, true, kNegInf, y);
  EXPECT_NEAR(fit.intercept, 1.0, 1e-12);
  EXPECT_NEAR(fit.slope, 2.0, 1e-12);
  EXPECT_EQ(fit.lower, -1.0);
  EXPECT_EQ(fit.upper, 5.0);
  EXPECT_EQ(fit(100.0), 5.0);  // clamped to the risk-set range
}

TEST(ConditionalMean, ConstantResponseGivesZeroSlope) {
  const Dataset d = make({1, 2, 3, 4}, {1, 1, 1, 1}, {1, 1, 1, 0}, {{0.5, 3.0, -1.0, 2.0}});
  const std::vector<double> y{7.0, 7.0, 7.0, 1.0};
  // On the first three rows every row is in the treated risk set, so the
  // masked response is constant too.
  for (auto form : {ConditionalMeanForm::subsample, ConditionalMeanForm::masked}) {
    const auto fit = fit_conditional_mean_regression(d, 3, 0, true, kNegInf, y, form);
    EXPECT_NEAR(fit.slope, 0.0, 1e-14);
    EXPECT_NEAR(fit(0.4), 7.0, 1e-14);
  }
  // Over all four rows only the sub-sample form keeps a zero slope.
  EXPECT_NEAR(fit_conditional_mean_regression(d, 4, 0, true, kNegInf, y).slope, 0.0, 1e-14);
}

TEST(ConditionalMean, SingletonRiskSetFallsBack) {
  const Dataset d = make({1, 2, 3, 4}, {1, 1, 1, 1}, {1, 1, 1, 0}, {{0.5, 3.0, -1.0, 2.0}});
  const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
  for (auto form : {ConditionalMeanForm::subsample, ConditionalMeanForm::masked}) {
    const auto late = fit_conditional_mean_regression(d, 4, 0, true, 3.0, y, form);
    const auto base = fit_conditional_mean_regression(d, 4, 0, true, kNegInf, y, form);
    EXPECT_TRUE(late.fallback);
    EXPECT_EQ(late.intercept, base.intercept);
    EXPECT_EQ(late.slope, base.slope);
  }
}

TEST(ConditionalMean, PathMatchesDirectFits) {
  for (auto form : {ConditionalMeanForm::subsample, ConditionalMeanForm::masked}) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const Dataset d = gen::dataset(seed, {.n = 60, .p = 2, .censor_prob = 0.4, .grid = seed % 2 ? 0.2 : 0.0});
      const auto cf = fit_censoring(d);
      const std::size_t len = 45;
      const auto med = build_mediator_nuisance(d, len, 0, *cf, form);
      const auto jumps = cf->model.jump_times();
      for (std::size_t m = 0; m < jumps.size(); ++m) {
        const auto direct = fit_conditional_mean_regression(d, len, 0, true, jumps[m], cf->responses.y, form);
        for (double u : {-1.5, 0.0, 0.8}) {
          EXPECT_NEAR(med.treated_path.value(m, u), direct(u), 1e-9) << "seed " << seed << " jump " << m;
        }
        EXPECT_EQ(med.treated_path.fallback[m] != 0, direct.fallback);
      }
    }
  }
}

TEST(Assemble, PsiIsBetaTimesZeta) {
  const Dataset d = gen::dataset(17, {.n = 30, .p = 1});
  const auto ns = assemble_nuisance(d, d.n(), fit_censoring(d));
  const auto cf = fit_censoring(d);
  const double beta = fit_ksv_slope(d, d.n(), 0, cf->responses.y);
  const double zeta = fit_conditional_mediator_means(d, d.n(), 0).zeta;
  EXPECT_NEAR(ns.psi()[0], beta * zeta, 1e-12);
  EXPECT_EQ(ns.psi()[0], ns.beta()[0] * ns.zeta()[0]);
  EXPECT_EQ(ns.zeta()[0], ns.q1()[0] - ns.q0()[0]);
  EXPECT_GT(ns.exposure().p1, 0.0);
  EXPECT_LT(ns.exposure().p1, 1.0);
}

TEST(Assemble, ModelZeroPluginsStaySmall) {
  SimulationSpec spec;
  spec.p = 10;
  const double rate = calibrate_censoring_rate(spec, spec.censor_target, 1);
  int small = 0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const Dataset d = generate(spec, derive_seed(77, static_cast<std::uint64_t>(r)), rate);
    const auto ns = assemble_nuisance(d, d.n(), fit_censoring(d));
    double worst = 0.0;
    for (double v : ns.psi()) worst = std::max(worst, std::abs(v));
    small += worst < 0.15;
  }
  EXPECT_GE(small, static_cast<int>(0.95 * reps));
}

TEST(Assemble, ModelOnePluginCentresOnPointTwo) {
  SimulationSpec spec;
  spec.model = Model::M1;
  spec.p = 12;
  const double rate = calibrate_censoring_rate(spec, spec.censor_target, 1);
  double total = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const Dataset d = generate(spec, derive_seed(78, static_cast<std::uint64_t>(r)), rate);
    total += assemble_nuisance(d, d.n(), fit_censoring(d)).psi()[0];
  }
  EXPECT_NEAR(total / reps, 0.2, 0.05);
}

TEST(Assemble, ExtendedFitsMatchBruteForce) {
  const Dataset d = gen::dataset(23, {.n = 90, .p = 3, .q = 2, .censor_prob = 0.3});
  const auto cf = fit_censoring(d);
  const auto ns = assemble_nuisance(d, 70, cf, {.adjust_for_z = true});
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<std::vector<double>> ry, rb;
    std::vector<double> yy, bb;
    for (std::size_t i = 0; i < 70; ++i) {
      const double a = d.exposure()[i];
      ry.push_back({1.0, a, d.mediator(i, k), d.confounder(i, 0), d.confounder(i, 1)});
      rb.push_back({1.0, a, d.confounder(i, 0), d.confounder(i, 1)});
      yy.push_back(cf->responses.y[i]);
      bb.push_back(d.mediator(i, k));
    }
    EXPECT_NEAR(ns.beta()[k], gen::normal_equations(ry, yy)[2], 1e-9);
    EXPECT_NEAR(ns.zeta()[k], gen::normal_equations(rb, bb)[1], 1e-9);
    EXPECT_NEAR(ns.beta()[k], fit_ksv_slope(d, 70, k, cf->responses.y, true), 1e-9);
  }
}

TEST(Assemble, ScopeAndFormNamesRoundTrip) {
  EXPECT_EQ(parse_conditional_mean_form(to_string(ConditionalMeanForm::masked)), ConditionalMeanForm::masked);
  EXPECT_EQ(parse_conditional_mean_form("subsample"), ConditionalMeanForm::subsample);
  EXPECT_THROW(parse_conditional_mean_form("other"), DomainError);
}
