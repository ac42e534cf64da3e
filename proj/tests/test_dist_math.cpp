#include "purm/dist_math.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace {

using purm::GaussianReward;
using purm::PairLossVariant;
using purm::PairStatistic;

TEST(Sigmoid, BasicIdentities) {
  EXPECT_DOUBLE_EQ(purm::sigmoid(0.0), 0.5);
  for (double z : {0.3, 1.7, 5.0, 20.0}) {
    EXPECT_NEAR(purm::sigmoid(z) + purm::sigmoid(-z), 1.0, 1e-15);
  }
  EXPECT_GT(purm::sigmoid(-700.0), -1e-300);
  EXPECT_LE(purm::sigmoid(-700.0), 1e-300);
  EXPECT_DOUBLE_EQ(purm::sigmoid(800.0), 1.0);
}

TEST(Softplus, MatchesLogOnePlusExp) {
  for (double x : {-30.0, -2.0, -0.1, 0.0, 0.1, 2.0, 30.0}) {
    EXPECT_NEAR(purm::softplus(x), std::log1p(std::exp(-std::abs(x))) +
                                       std::max(x, 0.0),
                1e-15);
  }
  EXPECT_NEAR(purm::softplus(50.0), 50.0, 1e-12);
  EXPECT_NEAR(purm::softplus(-50.0), std::exp(-50.0), 1e-30);
}

TEST(PairStatistic, CombinesMeansAndVariances) {
  const auto a = GaussianReward::from_sigma(1.0, 1.0);
  const auto b = GaussianReward::from_sigma(0.0, 1.0);
  const PairStatistic ps = purm::pair_statistic(a, b);
  EXPECT_DOUBLE_EQ(ps.mu_z, 1.0);
  EXPECT_DOUBLE_EQ(ps.sigma_z, std::sqrt(2.0));

  const auto c = GaussianReward::from_sigma(-0.5, 0.3);
  const auto d = GaussianReward::from_sigma(2.0, 0.4);
  const PairStatistic ps2 = purm::pair_statistic(c, d);
  EXPECT_NEAR(ps2.mu_z, -2.5, 1e-15);
  EXPECT_NEAR(ps2.sigma_z, 0.5, 1e-15);
}

TEST(PairStatistic, AntisymmetricInArguments) {
  const auto a = GaussianReward::from_sigma(0.7, 1.9);
  const auto b = GaussianReward::from_sigma(-1.2, 0.05);
  const auto pab = purm::pair_statistic(a, b);
  const auto pba = purm::pair_statistic(b, a);
  EXPECT_DOUBLE_EQ(pab.mu_z, -pba.mu_z);
  EXPECT_DOUBLE_EQ(pab.sigma_z, pba.sigma_z);
}

// Reference values computed with 40-digit quadrature of
// integral sigmoid(z) N(z | mu, sigma^2) dz, frozen here.
TEST(LikelihoodQuadrature, MatchesHighPrecisionReference) {
  const struct {
    double mu, sigma, expect;
  } cases[] = {
      {1.0, std::sqrt(2.0), 0.67505670233756540716},
      {2.0, 0.5, 0.87099346362277842304},
      {-1.5, 3.2, 0.34062954791621715506},
      {0.3, 0.05, 0.57439707646709040304},
      {-4.0, 5.0, 0.22566613431236431085},
      {0.7, 7.0, 0.53858019537777017992},
  };
  for (const auto& c : cases) {
    const double p = purm::likelihood_quadrature({c.mu, c.sigma});
    EXPECT_NEAR(p, c.expect, purm::tol::kPreferenceQuadratureAbs)
        << "mu=" << c.mu << " sigma=" << c.sigma;
  }
}

TEST(LikelihoodQuadrature, SymmetryAndMonotonicity) {
  // mu_z = 0 integrates a symmetric integrand: exactly 1/2.
  EXPECT_NEAR(purm::likelihood_quadrature({0.0, 1.3}), 0.5, 1e-13);
  // complement identity p(mu) + p(-mu) = 1
  for (double s : {0.2, 1.0, 4.0}) {
    for (double mu : {0.1, 0.9, 3.0, 8.0}) {
      const double p = purm::likelihood_quadrature({mu, s});
      const double q = purm::likelihood_quadrature({-mu, s});
      EXPECT_NEAR(p + q, 1.0, 1e-11);
    }
  }
  // monotone in mu_z at fixed sigma_z
  double prev = 0.0;
  for (double mu = -6.0; mu <= 6.0; mu += 0.5) {
    const double p = purm::likelihood_quadrature({mu, 1.7});
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(LikelihoodQuadrature, SaturatesButStaysInsideUnitInterval) {
  const double hi = purm::likelihood_quadrature({30.0, 0.5});
  EXPECT_GT(hi, 1.0 - 1e-6);
  EXPECT_LT(hi, 1.0);
  const double lo = purm::likelihood_quadrature({-30.0, 0.5});
  EXPECT_LT(lo, 1e-6);
  EXPECT_GT(lo, 0.0);
}

TEST(LikelihoodQuadrature, RejectsNonPositiveSigma) {
  EXPECT_THROW(purm::likelihood_quadrature({0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(purm::likelihood_quadrature({0.0, -1.0}), std::invalid_argument);
}

// The 2-D tensor integral and the 1-D margin form are the same quantity.
TEST(DoubleIntegralOracle, AgreesWithMarginReduction) {
  purm::Rng rng(1234);
  for (int i = 0; i < 40; ++i) {
    const auto a = GaussianReward::from_sigma(rng.uniform(-8.0, 8.0),
                                              rng.uniform(0.05, 5.0));
    const auto b = GaussianReward::from_sigma(rng.uniform(-8.0, 8.0),
                                              rng.uniform(0.05, 5.0));
    const double direct = purm::double_integral_oracle(a, b);
    const double reduced = purm::likelihood_quadrature(purm::pair_statistic(a, b));
    ASSERT_NEAR(direct, reduced, 1e-8)
        << "a=(" << a.mu << "," << a.sigma() << ") b=(" << b.mu << ","
        << b.sigma() << ")";
  }
}

TEST(LikelihoodMc, ConvergesToQuadrature) {
  const PairStatistic ps{0.8, 1.1};
  const double pq = purm::likelihood_quadrature(ps);
  const int n = 100000;
  const double bound = 4.0 * std::sqrt(0.25 / n);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    purm::Rng rng(seed);
    const double pm = purm::likelihood_mc(ps, n, rng);
    EXPECT_NEAR(pm, pq, bound) << "seed " << seed;
  }
}

TEST(LikelihoodMc, ZeroMeanUnitishHalf) {
  purm::Rng rng(77);
  const double p = purm::likelihood_mc({0.0, std::sqrt(2.0)}, 200000, rng);
  EXPECT_NEAR(p, 0.5, 0.01);
}

TEST(LikelihoodMc, RejectsBadSampleCount) {
  purm::Rng rng(1);
  EXPECT_THROW(purm::likelihood_mc({0.0, 1.0}, 0, rng), std::invalid_argument);
}

TEST(Bhattacharyya, ClosedFormReferencePoints) {
  // identical distributions
  EXPECT_DOUBLE_EQ(purm::bc_closed_form(0.4, 1.7, 0.4, 1.7), 1.0);
  // equal sigmas, mean gap 2: exp(-4/8)
  EXPECT_NEAR(purm::bc_closed_form(0.0, 1.0, 2.0, 1.0), std::exp(-0.5), 1e-15);
  // equal means, sigma 1 vs 2: sqrt(4/5)
  EXPECT_NEAR(purm::bc_closed_form(0.0, 1.0, 0.0, 2.0), std::sqrt(0.8), 1e-15);
  // mean gap 1, unit sigmas: exp(-1/8)
  EXPECT_NEAR(purm::bc_closed_form(0.0, 1.0, 1.0, 1.0), std::exp(-0.125),
              1e-15);
}

TEST(Bhattacharyya, RangeSymmetryAndMaximum) {
  purm::Rng rng(5150);
  for (int i = 0; i < 200; ++i) {
    const double m1 = rng.uniform(-10.0, 10.0);
    const double m2 = rng.uniform(-10.0, 10.0);
    const double s1 = rng.uniform(0.05, 5.0);
    const double s2 = rng.uniform(0.05, 5.0);
    const double bc = purm::bc_closed_form(m1, s1, m2, s2);
    ASSERT_GT(bc, 0.0);
    ASSERT_LE(bc, 1.0);
    ASSERT_DOUBLE_EQ(bc, purm::bc_closed_form(m2, s2, m1, s1));
    // widening the mean gap can only lower the overlap
    const double bc_far = purm::bc_closed_form(m1, s1, m2 + 5.0 * (m2 >= m1 ? 1 : -1), s2);
    ASSERT_LE(bc_far, bc + 1e-12);
  }
}

TEST(Bhattacharyya, NumericMatchesClosedForm) {
  const struct {
    double m1, s1, m2, s2;
  } cases[] = {
      {0.0, 1.0, 0.0, 1.0},   {0.0, 1.0, 2.0, 1.0},  {0.0, 1.0, 0.0, 2.0},
      {-3.0, 0.05, 3.0, 0.05}, {1.0, 0.05, 1.2, 4.0}, {-20.0, 1.0, 20.0, 1.0},
      {5.0, 3.3, -4.0, 0.7},  {0.0, 0.05, 0.01, 0.05},
  };
  for (const auto& c : cases) {
    const auto a = GaussianReward::from_sigma(c.m1, c.s1);
    const auto b = GaussianReward::from_sigma(c.m2, c.s2);
    EXPECT_NEAR(purm::bc_numeric(a, b), purm::bc_closed_form(a, b),
                purm::tol::kBhattacharyyaNumericAbs)
        << c.m1 << "," << c.s1 << " vs " << c.m2 << "," << c.s2;
  }
}

TEST(Bhattacharyya, RejectsNonPositiveSigma) {
  EXPECT_THROW(purm::bc_closed_form(0.0, 0.0, 0.0, 1.0), std::invalid_argument);
}

double loss_value(const PairStatistic& ps, PairLossVariant v, int n,
                  std::uint64_t seed) {
  purm::Rng rng(seed);
  return purm::pair_loss_value_and_grad(ps, v, n, rng).loss;
}

// Finite differences against frozen epsilon draws (same RNG seed per call)
// must match the analytic pathwise gradient.
TEST(PairLoss, GradientsMatchFiniteDifferences) {
  const double h = 1e-5;
  purm::Rng cfg_rng(2024);
  for (PairLossVariant v :
       {PairLossVariant::kLogOfMean, PairLossVariant::kMeanOfLog}) {
    for (int rep = 0; rep < 10; ++rep) {
      const PairStatistic ps{cfg_rng.uniform(-3.0, 3.0),
                             cfg_rng.uniform(0.2, 3.0)};
      const std::uint64_t seed = 900 + rep;
      purm::Rng rng(seed);
      const auto g = purm::pair_loss_value_and_grad(ps, v, 2000, rng);

      const double fd_mu = (loss_value({ps.mu_z + h, ps.sigma_z}, v, 2000, seed) -
                            loss_value({ps.mu_z - h, ps.sigma_z}, v, 2000, seed)) /
                           (2 * h);
      const double fd_sg =
          (loss_value({ps.mu_z, ps.sigma_z + h}, v, 2000, seed) -
           loss_value({ps.mu_z, ps.sigma_z - h}, v, 2000, seed)) /
          (2 * h);
      const double scale_mu = std::max(std::abs(fd_mu), 1e-3);
      const double scale_sg = std::max(std::abs(fd_sg), 1e-3);
      ASSERT_NEAR(g.d_mu_z, fd_mu, purm::tol::kGradCheckRel * scale_mu)
          << "variant " << static_cast<int>(v) << " rep " << rep;
      ASSERT_NEAR(g.d_sigma_z, fd_sg, purm::tol::kGradCheckRel * scale_sg)
          << "variant " << static_cast<int>(v) << " rep " << rep;
    }
  }
}

TEST(PairLoss, ValueMatchesMcLikelihood) {
  const PairStatistic ps{0.4, 1.6};
  purm::Rng r1(31), r2(31);
  const auto g = purm::pair_loss_value_and_grad(
      ps, PairLossVariant::kLogOfMean, 5000, r1);
  const double p = purm::likelihood_mc(ps, 5000, r2);
  EXPECT_NEAR(g.loss, -std::log(p), 1e-12);
}

// Jensen: mean of -log sigmoid dominates -log of mean sigmoid on the same
// epsilon draws.
TEST(PairLoss, VariantOrdering) {
  purm::Rng cfg_rng(777);
  for (int rep = 0; rep < 20; ++rep) {
    const PairStatistic ps{cfg_rng.uniform(-2.0, 2.0),
                           cfg_rng.uniform(0.1, 3.0)};
    const double lom = loss_value(ps, PairLossVariant::kLogOfMean, 500, rep);
    const double mol = loss_value(ps, PairLossVariant::kMeanOfLog, 500, rep);
    ASSERT_GE(mol + 1e-12, lom);
  }
}

TEST(PairLoss, NonNegativeAndSaturationBehavior) {
  purm::Rng rng(4);
  const auto g_hi = purm::pair_loss_value_and_grad(
      {30.0, 0.1}, PairLossVariant::kLogOfMean, 1000, rng);
  EXPECT_GE(g_hi.loss, 0.0);
  EXPECT_LT(g_hi.loss, 1e-6);

  purm::Rng rng2(4);
  const auto g_lo = purm::pair_loss_value_and_grad(
      {-30.0, 0.1}, PairLossVariant::kLogOfMean, 1000, rng2);
  EXPECT_GT(g_lo.loss, 25.0);
  EXPECT_TRUE(std::isfinite(g_lo.loss));
  EXPECT_NEAR(g_lo.d_mu_z, -1.0, 1e-3);
}

// For the averaged-sigmoid loss the sigma gradient carries the sign of mu_z:
// extra margin variance helps misranked pairs (mu_z < 0) and hurts correctly
// ranked ones (mu_z > 0).
TEST(PairLoss, SigmaGradientSignTracksMean) {
  for (double mu : {-3.0, -1.0, -0.25, 0.25, 1.0, 3.0}) {
    for (double s : {0.3, 1.0, 3.0}) {
      purm::Rng rng(1000 + static_cast<std::uint64_t>(mu * 10 + s * 100));
      const auto g = purm::pair_loss_value_and_grad(
          {mu, s}, PairLossVariant::kLogOfMean, 20000, rng);
      if (mu > 0) {
        ASSERT_GT(g.d_sigma_z, 0.0) << "mu=" << mu << " s=" << s;
      } else {
        ASSERT_LT(g.d_sigma_z, 0.0) << "mu=" << mu << " s=" << s;
      }
    }
  }
}

}  // namespace
