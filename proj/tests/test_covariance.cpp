#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "stlgm/covariance.hpp"
#include "stlgm/error.hpp"
#include "support/oracles.hpp"

namespace stlgm {
namespace {

using testing::two_scale_theta;

TEST(ExpCorrelation, Values) {
  EXPECT_EQ(exp_correlation(0.0, 7.0), 1.0);
  EXPECT_NEAR(exp_correlation(50.0, 50.0), 0.367879441171, 1e-12);
  EXPECT_NEAR(exp_correlation(100.0, 50.0), 0.135335283237, 1e-12);
  EXPECT_THROW(exp_correlation(1.0, 0.0), ValidationError);
  EXPECT_THROW(exp_correlation(1.0, -2.0), ValidationError);
}

TEST(CovValue, TwoScaleParameters) {
  const auto theta = two_scale_theta();
  EXPECT_DOUBLE_EQ(cov_value(theta, 0.0, 0.0), 1.0);
  const double expected = 0.25 * std::exp(-0.04) * std::exp(-0.2) + 0.75 * std::exp(-1.0) * std::exp(-1.0);
  EXPECT_NEAR(cov_value(theta, 2.0, 10.0), expected, 1e-15);
  EXPECT_NEAR(cov_value(theta, 2.0, 10.0), 0.29816, 5e-6);
}

TEST(CovValue, SingleComponentReducesToSpatialExponential) {
  const CovarianceParams theta{{{1.0, 12.0, 5.0}}};
  for (double ds : {0.0, 1.0, 12.0, 40.0}) {
    EXPECT_NEAR(cov_value(theta, ds, 0.0), std::exp(-ds / 12.0), 1e-15);
  }
}

TEST(CovValue, RejectsInvalidParameters) {
  EXPECT_THROW(cov_value(CovarianceParams{{{1.0, 0.0, 1.0}}}, 1.0, 1.0), ValidationError);
  EXPECT_THROW(cov_value(CovarianceParams{}, 1.0, 1.0), ValidationError);
}

TEST(CovValue, SillAtZeroLagIsExact) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) {
    const auto theta = testing::random_theta(1 + k % 3, rng);
    EXPECT_EQ(cov_value(theta, 0.0, 0.0), theta.sill());
  }
}

TEST(CovValue, MonotoneInEachLag) {
  const auto theta = two_scale_theta();
  for (double dt : {0.0, 2.0, 18.0}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double ds = 0.0; ds <= 200.0; ds += 0.5) {
      const double k = cov_value(theta, ds, dt);
      EXPECT_LE(k, prev);
      prev = k;
    }
  }
  for (double ds : {0.0, 5.0, 60.0}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double dt = 0.0; dt <= 100.0; dt += 0.25) {
      const double k = cov_value(theta, ds, dt);
      EXPECT_LE(k, prev);
      prev = k;
    }
  }
}

TEST(CovValue, SumOfSeparablesIsNotSeparable) {
  const auto theta = two_scale_theta();
  const double r0 = cov_value(theta, 0.0, 2.0) / cov_value(theta, 0.0, 18.0);
  const double r50 = cov_value(theta, 50.0, 2.0) / cov_value(theta, 50.0, 18.0);
  EXPECT_GT(std::abs(r0 - r50), 1e-6);
  // a single separable component keeps the ratio fixed
  const CovarianceParams sep{{{1.0, 10.0, 10.0}}};
  EXPECT_NEAR(cov_value(sep, 0.0, 2.0) / cov_value(sep, 0.0, 18.0),
              cov_value(sep, 50.0, 2.0) / cov_value(sep, 50.0, 18.0), 1e-12);
}

TEST(CovMatrix, MatchesBruteForceAndSmallCases) {
  const auto theta = two_scale_theta();
  const std::vector<SpaceTimeCoord> one{{1.0, 2.0, 2005.0}};
  const auto k1 = cov_matrix(theta, one, one);
  ASSERT_EQ(k1.rows(), 1);
  EXPECT_NEAR(k1(0, 0), 1.0, 1e-15);

  const std::vector<SpaceTimeCoord> same{{1.0, 2.0, 2005.0}, {1.0, 2.0, 2005.0}};
  const auto k2 = cov_matrix(theta, same, same);
  EXPECT_TRUE((k2.array() == k2(0, 0)).all());

  std::mt19937_64 rng(5);
  const auto c = testing::random_coords(3, rng);
  const auto k = cov_matrix(theta, c, c);
  const auto ref = testing::dense_cov(theta, c, c);
  EXPECT_LT((k - ref).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CovMatrix, SymmetricPositiveSemidefinite) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const auto coords = testing::random_coords(2 + rep % 9, rng);
    const auto theta = testing::random_theta(1 + rep % 2, rng);
    const Eigen::MatrixXd k = cov_matrix(theta, coords, coords);
    EXPECT_EQ((k - k.transpose()).cwiseAbs().maxCoeff(), 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-10 * k.trace());
  }
}

TEST(GammaHyper, MeanSdParameterization) {
  auto h = gamma_hyper({1.0, 1.0});
  EXPECT_EQ(h.shape, 1.0);
  EXPECT_EQ(h.rate, 1.0);
  h = gamma_hyper({50.0, 10.0});
  EXPECT_EQ(h.shape, 25.0);
  EXPECT_EQ(h.rate, 0.5);
  h = gamma_hyper({10.0, 5.0});
  EXPECT_EQ(h.shape, 4.0);
  EXPECT_EQ(h.rate, 0.4);
  EXPECT_THROW(gamma_hyper({0.0, 1.0}), ValidationError);
  EXPECT_THROW(gamma_hyper({1.0, -1.0}), ValidationError);
}

TEST(GammaHyper, RoundTripsMeanAndSd) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 500.0);
  for (int k = 0; k < 1000; ++k) {
    const GammaPrior p{u(rng), u(rng)};
    const auto h = gamma_hyper(p);
    EXPECT_NEAR(h.shape / h.rate, p.mean, 1e-12 * p.mean);
    EXPECT_NEAR(std::sqrt(h.shape) / h.rate, p.sd, 1e-12 * p.sd);
  }
}

PriorSpec y_priors_two_scale() {
  PriorSpec p;
  p.components = {{{2.0, 1.9}, {50.0, 10.0}, {100.0, 90.0}}, {{4.0, 3.9}, {10.0, 5.0}, {100.0, 90.0}}};
  p.tau = GammaPrior{1.0, 1.0};
  p.alpha = {5.0, 10.0};
  return p;
}

double gamma_pdf_log(double x, double mean, double sd) {
  // independent route: density written in shape/scale form
  const double k = mean * mean / (sd * sd);
  const double scale = sd * sd / mean;
  return (k - 1) * std::log(x) - x / scale - std::lgamma(k) - k * std::log(scale);
}

TEST(LogPrior, SumsIndependentDensities) {
  const auto priors = y_priors_two_scale();
  const auto theta = priors.prior_mean_theta();
  double expected = 0.0;
  for (const auto& c : priors.components) {
    expected += gamma_pdf_log(c.sigma.mean, c.sigma.mean, c.sigma.sd);
    expected += gamma_pdf_log(c.phi.mean, c.phi.mean, c.phi.sd);
    expected += gamma_pdf_log(c.lambda.mean, c.lambda.mean, c.lambda.sd);
  }
  expected += gamma_pdf_log(1.0, 1.0, 1.0);
  const double alpha_term = -std::log(10.0 * std::sqrt(2.0 * std::numbers::pi));
  EXPECT_NEAR(log_prior(theta, 1.0, 5.0, priors), expected + alpha_term, 1e-10);
}

TEST(LogPrior, OutsideSupportIsNegativeInfinity) {
  const auto priors = y_priors_two_scale();
  auto theta = priors.prior_mean_theta();
  theta.components[1].phi = -1.0;
  EXPECT_EQ(log_prior(theta, 1.0, 0.0, priors), -std::numeric_limits<double>::infinity());
  theta = priors.prior_mean_theta();
  EXPECT_EQ(log_prior(theta, 0.0, 0.0, priors), -std::numeric_limits<double>::infinity());
}

TEST(PriorSpec, RequiresDecreasingRangeMeans) {
  auto priors = y_priors_two_scale();
  EXPECT_NO_THROW(priors.validate());
  std::swap(priors.components[0].phi, priors.components[1].phi);
  EXPECT_THROW(priors.validate(), ValidationError);
}

TEST(Semivariogram, TheoreticalBins) {
  const auto theta = two_scale_theta();
  const std::vector<std::vector<LagPair>> bins{{{0.0, 0.0}}, {{1e9, 1e9}}, {{2.0, 10.0}}, {}};
  const auto g = theoretical_semivariogram(theta, bins);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(*g[0], 0.0);
  EXPECT_NEAR(*g[1], 1.0, 1e-15);
  EXPECT_NEAR(*g[2], 1.0 - cov_value(theta, 2.0, 10.0), 1e-15);
  EXPECT_NEAR(*g[2], 0.70184, 5e-6);
  EXPECT_FALSE(g[3].has_value());
  const auto norm = normalize_by_max(g);
  EXPECT_NEAR(*norm[1], 1.0, 1e-15);
  EXPECT_FALSE(norm[3].has_value());
}

TEST(Semivariogram, PlusCovarianceEqualsSill) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> lag(0.0, 100.0);
  for (int k = 0; k < 500; ++k) {
    const auto theta = testing::random_theta(1 + k % 3, rng);
    const double ds = lag(rng), dt = lag(rng);
    EXPECT_NEAR(semivariogram_value(theta, ds, dt) + cov_value(theta, ds, dt), theta.sill(),
                1e-14 * theta.sill());
  }
}

}  // namespace
}  // namespace stlgm
