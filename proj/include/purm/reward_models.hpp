#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "purm/dist_math.hpp"
#include "purm/mlp.hpp"

namespace purm {

// Bounds on the log-sigma head output; keeps MLE away from degenerate
// zero/infinite variance.
inline constexpr double kLogSigmaMin = -6.0;
inline constexpr double kLogSigmaMax = 4.0;

// Head 0 is the reward mean, head 1 the (clamped) log standard deviation.
inline GaussianReward purm_forward(const MlpParams& p,
                                   const FeatureVector& phi) {
  if (p.out != 2) {
    throw std::invalid_argument("purm_forward: model must have two heads");
  }
  const MlpActivation act = mlp_forward(p, phi);
  return GaussianReward{
      act.output[0], std::clamp(act.output[1], kLogSigmaMin, kLogSigmaMax)};
}

inline double btrm_forward(const MlpParams& p, const FeatureVector& phi) {
  if (p.out != 1) {
    throw std::invalid_argument("btrm_forward: model must have one head");
  }
  return mlp_forward(p, phi).output[0];
}

struct EnsembleParams {
  std::vector<MlpParams> members;  // k one-head networks sharing (d, h)
  double alpha = 0.5;              // variance penalty weight for uwo
};

inline std::vector<double> ensemble_forward(const EnsembleParams& e,
                                            const FeatureVector& phi) {
  std::vector<double> rewards;
  rewards.reserve(e.members.size());
  for (const MlpParams& m : e.members) rewards.push_back(btrm_forward(m, phi));
  return rewards;
}

enum class AggregateRule { kMean, kWco, kUwo };

// mean: arithmetic mean. wco: minimum (worst case). uwo: mean minus
// alpha times the population variance.
inline double aggregate(const std::vector<double>& rewards, AggregateRule rule,
                        double alpha) {
  if (rewards.empty()) {
    throw std::invalid_argument("aggregate: empty reward list");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  switch (rule) {
    case AggregateRule::kMean:
      return mean;
    case AggregateRule::kWco: {
      double lo = rewards[0];
      for (double r : rewards) lo = std::min(lo, r);
      return lo;
    }
    case AggregateRule::kUwo: {
      double var = 0.0;
      for (double r : rewards) var += (r - mean) * (r - mean);
      var /= static_cast<double>(rewards.size());
      return mean - alpha * var;
    }
  }
  throw std::logic_error("aggregate: unknown rule");
}

// Population standard deviation of the member rewards.
inline double ensemble_uncertainty(const std::vector<double>& rewards) {
  if (rewards.empty()) {
    throw std::invalid_argument("ensemble_uncertainty: empty reward list");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  return std::sqrt(var);
}

inline MlpParams init_purm_params(int d, int h, std::uint64_t seed) {
  Rng rng(seed);
  return init_mlp(d, h, 2, rng);
}

inline MlpParams init_btrm_params(int d, int h, std::uint64_t seed) {
  Rng rng(seed);
  return init_mlp(d, h, 1, rng);
}

inline EnsembleParams init_ensemble_params(int d, int h, int k, double alpha,
                                           std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("init_ensemble_params: k must be >= 2");
  EnsembleParams e;
  e.alpha = alpha;
  e.members.reserve(k);
  for (int i = 0; i < k; ++i) {
    Rng rng = Rng::derive(seed, 0x424D0000ULL + static_cast<std::uint64_t>(i));
    e.members.push_back(init_mlp(d, h, 1, rng));
  }
  return e;
}

}  // namespace purm
