#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "akrel/estimator.hpp"
#include "oracles/bvn_quadrature.hpp"
#include "oracles/indicator_simulation.hpp"

using namespace akrel;

namespace {

std::vector<MarginalPrediction> preds_of(std::initializer_list<std::pair<double, double>> mv) {
  std::vector<MarginalPrediction> out;
  for (auto [m, v] : mv) out.push_back({m, v});
  return out;
}

std::vector<MarginalPrediction> random_preds(int n, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> mu(0.0, 1.5);
  std::uniform_real_distribution<double> sd(0.2, 2.0);
  std::vector<MarginalPrediction> out;
  for (int i = 0; i < n; ++i) {
    const double s = sd(g);
    out.push_back({mu(g), s * s});
  }
  return out;
}

// Kriging surrogate of a smooth 2-D function on a sparse design, so that a
// local pool carries strongly correlated, uncertain predictions.
struct CorrelatedPool {
  KrigingModel model;
  RowMatrix pool;
  PoolProjection proj;
  std::vector<MarginalPrediction> preds;

  explicit CorrelatedPool(int n, unsigned seed) : model(make_model()) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    pool.resize(n, 2);
    for (int i = 0; i < n; ++i) pool.row(i) << u(g), u(g);
    proj = PoolProjection(model, pool);
    preds = proj.predictions(model);
  }

  static KrigingModel make_model() {
    DesignOfExperiment d;
    d.points.resize(6, 2);
    d.points << -2.0, -2.0, 2.0, -2.0, -2.0, 2.0, 2.0, 2.0, 0.0, 2.5, 2.5, 0.0;
    d.responses.resize(6);
    for (int i = 0; i < 6; ++i) d.responses[i] = 0.4 * d.points(i, 0) - 0.3 * d.points(i, 1) + 0.2;
    Vector th(2);
    th << 0.15, 0.2;
    return KrigingModel::with_theta(d, th);
  }
};

}  // namespace

TEST(PfDeterministic, CountsNonPositiveMeans) {
  EXPECT_EQ(pf_deterministic(preds_of({{-1, 1}, {-1, 1}, {-1, 1}})), 1.0);
  EXPECT_EQ(pf_deterministic(preds_of({{1, 1}, {1, 1}})), 0.0);
  EXPECT_EQ(pf_deterministic(preds_of({{-1, 1}, {1, 1}, {1, 1}, {1, 1}})), 0.25);
  EXPECT_EQ(pf_deterministic(preds_of({{0, 1}, {1, 1}})), 0.5);
  EXPECT_THROW(pf_deterministic({}), InvalidArgument);
}

TEST(PfProbabilistic, Examples) {
  EXPECT_EQ(pf_probabilistic(preds_of({{0, 1}, {0, 4}, {0, 0.1}})), 0.5);
  EXPECT_NEAR(pf_probabilistic(preds_of({{-10, 1}, {-20, 4}})), 1.0, 1e-15);
  EXPECT_THROW(pf_probabilistic({}), InvalidArgument);
}

TEST(PfProbabilistic, ZeroVarianceUsesSignRule) {
  EXPECT_EQ(pf_probabilistic(preds_of({{-1, 0}, {1, 0}, {0, 0}, {2, 0}})), (1.0 + 0.5) / 4.0);
}

TEST(PfProbabilistic, ExactSurrogateOfLinearLimitState) {
  const int n = 100000;
  std::mt19937_64 g(2024);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<MarginalPrediction> p;
  for (int i = 0; i < n; ++i) p.push_back({2.0 - nd(g), 0.0});
  const double exact = oracle::std_cdf(-2.0);
  const double se = std::sqrt(exact * (1 - exact) / n);
  EXPECT_NEAR(pf_probabilistic(p), exact, 3 * se);
  EXPECT_EQ(pf_probabilistic(p), pf_deterministic(p));
}

TEST(PfProbabilistic, ZeroVarianceSafePointsScaleEstimate) {
  auto p = random_preds(40, 3);
  const double base = pf_probabilistic(p);
  for (int k = 0; k < 10; ++k) p.push_back({1.0 + k, 0.0});
  EXPECT_NEAR(pf_probabilistic(p), base * 40.0 / 50.0, 1e-15);
}

TEST(PfProbabilistic, DeterministicLimit) {
  auto p = random_preds(200, 5);
  for (auto& q : p) q.variance = 1e-300;
  EXPECT_EQ(pf_probabilistic(p), pf_deterministic(p));
}

TEST(VarMi, Examples) {
  EXPECT_EQ(var_mi(preds_of({{0, 1}})), 0.25);
  EXPECT_NEAR(var_mi(preds_of({{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}})), 0.25 / 5, 1e-16);
  EXPECT_THROW(var_mi({}), InvalidArgument);
}

TEST(VarMi, BoundedByQuarterOverN) {
  for (unsigned s = 0; s < 20; ++s) {
    const auto p = random_preds(30, s);
    EXPECT_LE(var_mi(p), 0.25 / 30);
    EXPECT_GE(var_mi(p), 0.0);
  }
}

TEST(VarMi, MatchesIndependentBernoulliSimulation) {
  const auto p = random_preds(200, 11);
  std::vector<double> prob;
  for (const auto& q : p) prob.push_back(oracle::std_cdf(-q.mean / std::sqrt(q.variance)));
  const auto sim = oracle::bernoulli_average_variance(prob, 1000000, 17);
  EXPECT_NEAR(var_mi(p), sim.variance, 3 * sim.standard_error);
}

TEST(VarMc, DiagonalCovarianceEqualsVarMi) {
  const auto p = random_preds(60, 19);
  const double v = var_mc(p.size(), [&](std::size_t j, std::size_t k) { return j == k ? sigma_b2(p[j]) : 0.0; });
  EXPECT_NEAR(v, var_mi(p), 1e-12);
}

TEST(VarMc, FullyCorrelatedIdenticalCandidates) {
  const double v = 0.17;
  EXPECT_NEAR(var_mc(25, [&](std::size_t, std::size_t) { return v; }), v, 1e-15);
  EXPECT_THROW(var_mc(0, [](std::size_t, std::size_t) { return 0.0; }), InvalidArgument);
}

TEST(VarMc, FieldWithDistantCandidatesEqualsVarMi) {
  DesignOfExperiment d;
  d.points.resize(3, 1);
  d.points << -10.0, 0.0, 10.0;
  d.responses.resize(3);
  d.responses << 1.0, -0.5, 2.0;
  const auto model = KrigingModel::with_theta(d, Vector::Constant(1, 50.0));
  RowMatrix pool(40, 1);
  for (int i = 0; i < 40; ++i) pool(i, 0) = -19.5 + i;
  const PoolProjection proj(model, pool);
  const auto preds = proj.predictions(model);
  const BernoulliField field(model, proj, preds);
  EXPECT_NEAR(var_mc(field), var_mi(preds), 1e-12);
}

TEST(VarMc, StreamedFieldEqualsAccessorSum) {
  const CorrelatedPool cp(120, 23);
  ScreeningOptions exact;
  exact.r_min = 0.0;
  exact.pair_tolerance = 0.0;
  const BernoulliField field(cp.model, cp.proj, cp.preds, exact);
  const double streamed = var_mc(field);
  const double summed = var_mc(field.size(), [&](std::size_t j, std::size_t k) { return field.cov(j, k); });
  EXPECT_NEAR(streamed, summed, 1e-12);
  EXPECT_GT(streamed, var_mi(cp.preds));
}

TEST(VarMc, MatchesJointGaussianIndicatorSimulation) {
  const CorrelatedPool cp(50, 29);
  const JointPrediction jp = cp.model.predict_joint(cp.pool);
  std::vector<MarginalPrediction> preds;
  for (int i = 0; i < 50; ++i) preds.push_back({jp.mean[i], jp.covariance(i, i)});
  const double v = var_mc(preds.size(), [&](std::size_t j, std::size_t k) {
    if (j == k) return sigma_b2(preds[j]);
    return sigma_b_cov(preds[j], preds[k], jp.covariance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
  });
  const auto sim = oracle::gaussian_indicator_variance(jp.mean, jp.covariance, 100000, 31);
  EXPECT_NEAR(v, sim.variance, 3 * sim.standard_error);
  // The pool is correlated enough that the independence model is far off.
  EXPECT_GT(sim.variance - var_mi(preds), 10 * sim.standard_error);
}

TEST(CovMcs, Examples) {
  EXPECT_NEAR(cov_mcs(0.5, 4), 0.5, 1e-15);
  EXPECT_NEAR(cov_mcs(0.01, 10000), std::sqrt(0.99 / 100), 1e-15);
  EXPECT_TRUE(cov_mcs_warning(0.01, 10000));
  // (1 - p) / (p n) = 0.0025 at n = 1e4 solves to p = 1/26.
  EXPECT_NEAR(cov_mcs(1.0 / 26.0, 10000), 0.05, 1e-12);
  EXPECT_NEAR(cov_mcs(0.0385, 10000), 0.05, 1e-3);
  EXPECT_FALSE(cov_mcs_warning(0.0729656, 10000));
  EXPECT_EQ(cov_mcs(0.0, 100), std::numeric_limits<double>::infinity());
  EXPECT_EQ(cov_mcs(1.0, 100), std::numeric_limits<double>::infinity());
  EXPECT_TRUE(cov_mcs_warning(0.0, 100));
  EXPECT_THROW(cov_mcs(0.5, 0), InvalidArgument);
}

TEST(StopCheck, Examples) {
  EXPECT_TRUE(stop_check(0.07, 0.0));
  EXPECT_FALSE(stop_check(0.07, std::pow(0.07 * 1e-3, 2) * 1.01));
  EXPECT_TRUE(stop_check(0.07, std::pow(0.07 * 1e-3, 2) * 0.99));
  EXPECT_FALSE(stop_check(0.0, 0.0));
  EXPECT_TRUE(stop_check(0.07, 1e-6, 0.05));
}

TEST(MakeStats, FieldsAreConsistent) {
  const auto s = make_stats(0.08, 1.6e-5, 10000, ClassificationMode::probabilistic, CorrelationMode::mc);
  EXPECT_EQ(s.pf_hat, 0.08);
  EXPECT_NEAR(s.cov_estimator, std::sqrt(1.6e-5) / 0.08, 1e-15);
  EXPECT_NEAR(s.cov_mcs, std::sqrt(0.92 / 800), 1e-15);
  EXPECT_FALSE(s.cov_mcs_warning);
  EXPECT_EQ(s.correlation_mode, CorrelationMode::mc);
  const auto z = make_stats(0.0, 0.0, 10000, ClassificationMode::deterministic, CorrelationMode::mi);
  EXPECT_EQ(z.cov_estimator, std::numeric_limits<double>::infinity());
  EXPECT_TRUE(z.cov_mcs_warning);
}
