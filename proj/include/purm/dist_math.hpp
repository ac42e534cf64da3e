#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "purm/quadrature.hpp"
#include "purm/rng.hpp"

namespace purm {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kInvSqrtPi = 0.5641895835477563;
inline constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Largest double below 1; probabilities are clamped into
// [DBL_MIN, kProbCeil] so -log(p) stays finite.
inline constexpr double kProbCeil =
    1.0 - std::numeric_limits<double>::epsilon() / 2.0;

namespace tol {
// Accuracy targets for the numeric estimators, asserted by the test suite.
inline constexpr double kPreferenceQuadratureAbs = 1e-10;
inline constexpr double kIntegralReductionAbs = 1e-6;
inline constexpr double kBhattacharyyaNumericAbs = 1e-8;
inline constexpr double kGradCheckRel = 1e-4;
}  // namespace tol

// A scalar reward distribution r ~ N(mu, sigma^2), parameterized by log sigma
// so that optimization over it is unconstrained.
struct GaussianReward {
  double mu = 0.0;
  double log_sigma = 0.0;

  double sigma() const { return std::exp(log_sigma); }

  static GaussianReward from_sigma(double mu, double sigma) {
    return GaussianReward{mu, std::log(sigma)};
  }
};

// Distribution of the reward margin z = r1 - r2 for independent Gaussians.
struct PairStatistic {
  double mu_z = 0.0;
  double sigma_z = 0.0;
};

inline PairStatistic pair_statistic(const GaussianReward& a,
                                    const GaussianReward& b) {
  const double s1 = a.sigma();
  const double s2 = b.sigma();
  return PairStatistic{a.mu - b.mu, std::hypot(s1, s2)};
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double normal_pdf(double x, double mu, double sigma) {
  const double t = (x - mu) / sigma;
  return kInvSqrt2Pi / sigma * std::exp(-0.5 * t * t);
}

inline double clamp_probability(double p) {
  return std::clamp(p, std::numeric_limits<double>::min(), kProbCeil);
}

// Monte Carlo estimate of E[sigmoid(z)], z ~ N(mu_z, sigma_z^2), using the
// reparameterization z_i = mu_z + sigma_z * eps_i.
inline double likelihood_mc(const PairStatistic& ps, int n_samples, Rng& rng) {
  if (n_samples < 1) {
    throw std::invalid_argument("likelihood_mc: n_samples must be >= 1");
  }
  double acc = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    acc += sigmoid(ps.mu_z + ps.sigma_z * rng.normal());
  }
  return clamp_probability(acc / n_samples);
}

namespace detail {

// Gauss-Hermite handles the preference integral to machine precision while
// the margin distribution is narrow; for wide ones the sigmoid knee falls
// far from the node cluster, so switch to adaptive quadrature on the
// breakpoints that matter (the mean, the knee at 0, and the 2-sigma band).
inline constexpr double kGhSigmaLimit = 2.0;
inline constexpr int kGhNodes1d = 96;
inline constexpr int kGhNodesWide2d = 256;

inline double wide_margin_integral(double mu, double sigma) {
  const auto f = [mu, sigma](double z) {
    return sigmoid(z) * normal_pdf(z, mu, sigma);
  };
  const double lo = mu - 10.0 * sigma;
  const double hi = mu + 10.0 * sigma;
  const std::vector<double> breaks = {mu - 2.0 * sigma, 0.0, mu,
                                      mu + 2.0 * sigma};
  return adaptive_simpson_split(f, lo, hi, breaks, 2e-13, 50);
}

}  // namespace detail

// Deterministic evaluation of E[sigmoid(z)], z ~ N(mu_z, sigma_z^2).
// Absolute accuracy tol::kPreferenceQuadratureAbs over mu_z in [-50, 50],
// sigma_z in (0, 8].
inline double likelihood_quadrature(const PairStatistic& ps) {
  if (!(ps.sigma_z > 0.0)) {
    throw std::invalid_argument("likelihood_quadrature: sigma_z must be > 0");
  }
  double p;
  if (ps.sigma_z <= detail::kGhSigmaLimit) {
    const GaussHermiteRule& q = gauss_hermite(detail::kGhNodes1d);
    double acc = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      acc += q.weights[i] * sigmoid(ps.mu_z + kSqrt2 * ps.sigma_z * q.nodes[i]);
    }
    p = acc * kInvSqrtPi;
  } else {
    p = detail::wide_margin_integral(ps.mu_z, ps.sigma_z);
  }
  return clamp_probability(p);
}

// Direct 2-D tensor quadrature of
//   integral integral sigmoid(r1 - r2) N(r1) N(r2) dr1 dr2
// without the margin-variable reduction. Exists as an independent
// cross-check of likelihood_quadrature; prefer the 1-D form elsewhere.
inline double double_integral_oracle(const GaussianReward& a,
                                     const GaussianReward& b) {
  const double s1 = a.sigma();
  const double s2 = b.sigma();
  const int n = (std::hypot(s1, s2) <= detail::kGhSigmaLimit)
                    ? detail::kGhNodes1d
                    : detail::kGhNodesWide2d;
  const GaussHermiteRule& q = gauss_hermite(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double r1 = a.mu + kSqrt2 * s1 * q.nodes[i];
    double inner = 0.0;
    for (std::size_t j = 0; j < q.nodes.size(); ++j) {
      const double r2 = b.mu + kSqrt2 * s2 * q.nodes[j];
      inner += q.weights[j] * sigmoid(r1 - r2);
    }
    acc += q.weights[i] * inner;
  }
  return clamp_probability(acc / kPi);
}

// Bhattacharyya coefficient of two Gaussians:
//   BC = sqrt(2 s1 s2 / (s1^2 + s2^2)) * exp(-(mu1-mu2)^2 / (4 (s1^2+s2^2)))
// Lies in (0, 1]; equals 1 iff the distributions coincide.
inline double bc_closed_form(double mu1, double sigma1, double mu2,
                             double sigma2) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) {
    throw std::invalid_argument("bc_closed_form: sigmas must be > 0");
  }
  const double ss = sigma1 * sigma1 + sigma2 * sigma2;
  const double d = mu1 - mu2;
  return std::sqrt(2.0 * sigma1 * sigma2 / ss) * std::exp(-d * d / (4.0 * ss));
}

inline double bc_closed_form(const GaussianReward& a, const GaussianReward& b) {
  return bc_closed_form(a.mu, a.sigma(), b.mu, b.sigma());
}

// Numeric Bhattacharyya coefficient: integral of sqrt(p(x) q(x)). The
// integrand is evaluated in log space so far-apart narrow components do not
// underflow inside the product.
inline double bc_numeric(const GaussianReward& a, const GaussianReward& b) {
  const double s1 = a.sigma();
  const double s2 = b.sigma();
  const double log_norm =
      -0.5 * (std::log(2.0 * kPi * s1 * s1) + std::log(2.0 * kPi * s2 * s2));
  const auto f = [&](double x) {
    const double t1 = (x - a.mu) / s1;
    const double t2 = (x - b.mu) / s2;
    const double log_pq = log_norm - 0.5 * (t1 * t1 + t2 * t2);
    return std::exp(0.5 * log_pq);
  };
  const double smax = std::max(s1, s2);
  const double lo = std::min(a.mu, b.mu) - 12.0 * smax;
  const double hi = std::max(a.mu, b.mu) + 12.0 * smax;
  const std::vector<double> breaks = {a.mu, b.mu, 0.5 * (a.mu + b.mu)};
  return adaptive_simpson_split(f, lo, hi, breaks, 1e-11, 50);
}

// Which Monte Carlo preference loss to optimize. kLogOfMean is
// -log of the averaged sigmoid (the default); kMeanOfLog averages
// -log sigmoid over the samples.
enum class PairLossVariant { kLogOfMean, kMeanOfLog };

struct PairLossGrad {
  double loss = 0.0;
  double d_mu_z = 0.0;
  double d_sigma_z = 0.0;
};

// Loss and pathwise gradients for one preference pair, sharing the epsilon
// draws between value and gradient so finite differences in (mu_z, sigma_z)
// against a frozen epsilon set reproduce the analytic gradient.
inline PairLossGrad pair_loss_value_and_grad(const PairStatistic& ps,
                                             PairLossVariant variant,
                                             int n_samples, Rng& rng) {
  if (n_samples < 1) {
    throw std::invalid_argument("pair_loss: n_samples must be >= 1");
  }
  PairLossGrad out;
  if (variant == PairLossVariant::kLogOfMean) {
    double sum_s = 0.0, sum_ds = 0.0, sum_ds_eps = 0.0;
    for (int i = 0; i < n_samples; ++i) {
      const double eps = rng.normal();
      const double s = sigmoid(ps.mu_z + ps.sigma_z * eps);
      const double ds = s * (1.0 - s);
      sum_s += s;
      sum_ds += ds;
      sum_ds_eps += ds * eps;
    }
    const double mean_s =
        std::max(sum_s / n_samples, std::numeric_limits<double>::min());
    out.loss = -std::log(mean_s);
    out.d_mu_z = -(sum_ds / n_samples) / mean_s;
    out.d_sigma_z = -(sum_ds_eps / n_samples) / mean_s;
  } else {
    double sum_loss = 0.0, sum_g = 0.0, sum_g_eps = 0.0;
    for (int i = 0; i < n_samples; ++i) {
      const double eps = rng.normal();
      const double z = ps.mu_z + ps.sigma_z * eps;
      sum_loss += softplus(-z);
      const double g = sigmoid(z) - 1.0;  // d(-log sigmoid(z))/dz
      sum_g += g;
      sum_g_eps += g * eps;
    }
    out.loss = sum_loss / n_samples;
    out.d_mu_z = sum_g / n_samples;
    out.d_sigma_z = sum_g_eps / n_samples;
  }
  return out;
}

}  // namespace purm
