#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "purm/checkpoint.hpp"
#include "purm/dist_math.hpp"
#include "purm/errors.hpp"
#include "purm/synth_data.hpp"
#include "purm/training.hpp"
#include "purm/uncertainty.hpp"

namespace purm {

inline constexpr double kLogStdMin = -4.0;
inline constexpr double kLogStdMax = 2.0;

// Linear-Gaussian policy: action ~ N(M x + m0, diag(exp(log_std))^2).
struct PolicySpec {
  int dc = 0;                      // context dimension
  int da = 0;                      // action dimension
  std::vector<double> m;           // da x dc mean map, row-major
  std::vector<double> m0;          // da bias
  std::vector<double> log_std;     // da, kept within [kLogStdMin, kLogStdMax]

  static PolicySpec make(int dc, int da, double log_std_init) {
    if (dc < 1 || da < 1) {
      throw std::invalid_argument("PolicySpec: dimensions must be >= 1");
    }
    PolicySpec p;
    p.dc = dc;
    p.da = da;
    p.m.assign(static_cast<std::size_t>(da) * dc, 0.0);
    p.m0.assign(da, 0.0);
    p.log_std.assign(da, std::clamp(log_std_init, kLogStdMin, kLogStdMax));
    return p;
  }

  std::vector<double> mean_action(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != dc) {
      throw std::invalid_argument("mean_action: context dimension mismatch");
    }
    std::vector<double> a(da);
    for (int j = 0; j < da; ++j) {
      double v = m0[j];
      const double* row = m.data() + static_cast<std::size_t>(j) * dc;
      for (int c = 0; c < dc; ++c) v += row[c] * x[c];
      a[j] = v;
    }
    return a;
  }
};

enum class PenaltyKind { kNone, kBc, kSigma, kSample };

inline std::string penalty_kind_name(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::kNone:
      return "none";
    case PenaltyKind::kBc:
      return "bc";
    case PenaltyKind::kSigma:
      return "sigma";
    case PenaltyKind::kSample:
      return "sample";
  }
  return "?";
}

inline PenaltyKind parse_penalty_kind(const std::string& s) {
  if (s == "none") return PenaltyKind::kNone;
  if (s == "bc") return PenaltyKind::kBc;
  if (s == "sigma") return PenaltyKind::kSigma;
  if (s == "sample") return PenaltyKind::kSample;
  throw ConfigError("unknown penalty kind: '" + s + "'");
}

struct RlConfig {
  RmKind rm_kind = RmKind::kPurm;
  PenaltyKind penalty_kind = PenaltyKind::kNone;
  double lambda = 0.0;
  double beta = 0.05;
  int steps = 400;
  int rollout_batch = 64;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int buffer_initial = 100;              // tracker gate k
  std::int64_t buffer_window = 1000000;  // tracker window w

  // environment construction
  int context_dim = 2;
  int action_dim = 2;
  double policy_lr = 0.05;
  double policy_log_std_init = -0.7;
  double oob_decay = 3.0;   // weight of the out-of-box true-reward decay
  int rm_pairs = 4000;      // preference pairs used to train the reward model
  int eval_contexts = 256;  // held-out contexts for true-reward evaluation
  ModelConfig model;
  TrainConfig rm_train;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("rl: lambda must be >= 0");
    if (!(beta >= 0.0)) throw ConfigError("rl: beta must be >= 0");
    if (steps < 1) throw ConfigError("rl: steps must be >= 1");
    if (rollout_batch < 1) throw ConfigError("rl: rollout_batch must be >= 1");
    if (seeds.empty()) throw ConfigError("rl: seeds must be nonempty");
    if (penalty_kind == PenaltyKind::kNone && lambda != 0.0) {
      throw ConfigError("rl: lambda must be 0 when penalty_kind is none");
    }
    if (penalty_kind != PenaltyKind::kNone && rm_kind != RmKind::kPurm) {
      throw ConfigError("rl: penalty kind '" +
                        penalty_kind_name(penalty_kind) +
                        "' requires the purm reward model");
    }
    if (context_dim < 1 || action_dim < 1) {
      throw ConfigError("rl: context/action dimensions must be >= 1");
    }
    if (rm_pairs < 1) throw ConfigError("rl: rm_pairs must be >= 1");
    if (eval_contexts < 1) throw ConfigError("rl: eval_contexts must be >= 1");
    if (buffer_initial < 1 || buffer_window < 1) {
      throw ConfigError("rl: buffer parameters must be >= 1");
    }
  }
};

// phi(x, y) = concat(x, y, tanh(x_i * y_i) pairing action coordinates with
// contexts cyclically); dimension dc + 2 da. Inside the unit boxes every
// coordinate lies in [-1, 1], so preference data drawn there leaves the
// reward model unconstrained outside.
inline FeatureVector rl_features(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  FeatureVector phi;
  phi.reserve(x.size() + 2 * y.size());
  phi.insert(phi.end(), x.begin(), x.end());
  phi.insert(phi.end(), y.begin(), y.end());
  for (std::size_t j = 0; j < y.size(); ++j) {
    phi.push_back(std::tanh(x[j % x.size()] * y[j]));
  }
  return phi;
}

struct Environment {
  WorldSpec world;  // over the feature space, d = dc + 2 da
  int dc = 0;
  int da = 0;
  double oob_decay = 0.0;
  Checkpoint rm;  // frozen after build_environment
  RmKind rm_kind = RmKind::kPurm;
  std::uint64_t rm_hash = 0;
};

// True performance: the world reward of the realized features minus a
// bounded decay that switches on outside the action box. The decay makes the
// global optimum sit inside the box while the learned proxy, fit only on
// in-box data, is free to extrapolate upward beyond it.
inline double env_true_reward(const Environment& env,
                              const std::vector<double>& x,
                              const std::vector<double>& y) {
  double decay = 0.0;
  for (double yj : y) {
    const double excess = std::max(0.0, std::abs(yj) - 1.0);
    decay += std::tanh(excess * excess);
  }
  return true_reward(env.world, rl_features(x, y)) - env.oob_decay * decay;
}

// Preference data over shared contexts: each record compares two candidate
// actions for one context, labeled by the preference law on true rewards.
inline std::vector<PreferenceRecord> sample_action_pairs(
    const WorldSpec& world, int dc, int da, int n, Rng& rng) {
  std::vector<PreferenceRecord> records;
  records.reserve(n);
  std::vector<double> x(dc), ya(da), yb(da);
  for (int i = 0; i < n; ++i) {
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    for (double& v : ya) v = rng.uniform(-1.0, 1.0);
    for (double& v : yb) v = rng.uniform(-1.0, 1.0);
    FeatureVector pa = rl_features(x, ya);
    FeatureVector pb = rl_features(x, yb);
    const double margin = true_reward(world, pa) - true_reward(world, pb);
    PreferenceRecord rec;
    if (rng.uniform() < sigmoid(margin)) {
      rec.phi_chosen = std::move(pa);
      rec.phi_rejected = std::move(pb);
    } else {
      rec.phi_chosen = std::move(pb);
      rec.phi_rejected = std::move(pa);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// Trains the configured reward model on in-box preference pairs and freezes
// it. Deterministic given (world.seed, cfg).
inline Environment build_environment(const WorldSpec& world,
                                     const RlConfig& cfg) {
  cfg.validate();
  const int d_phi = cfg.context_dim + 2 * cfg.action_dim;
  if (world.d != d_phi) {
    throw ConfigError("build_environment: world dimension " +
                      std::to_string(world.d) + " != feature dimension " +
                      std::to_string(d_phi));
  }
  Environment env;
  env.world = world;
  env.dc = cfg.context_dim;
  env.da = cfg.action_dim;
  env.oob_decay = cfg.oob_decay;
  env.rm_kind = cfg.rm_kind;

  Rng data_rng = Rng::derive(world.seed, 0x524D4441ULL);
  const auto records = sample_action_pairs(world, cfg.context_dim,
                                           cfg.action_dim, cfg.rm_pairs,
                                           data_rng);
  ModelConfig mc = cfg.model;
  mc.kind = cfg.rm_kind;
  TrainConfig tc = cfg.rm_train;
  tc.seed = detail::splitmix64(world.seed ^ 0x524D5452ULL);
  tc.log_every = 0;
  const TrainResult tr = train(mc, records, tc);
  env.rm = tr.checkpoint;
  env.rm_hash = checkpoint_hash(env.rm);
  return env;
}

struct Rollout {
  std::vector<std::vector<double>> actions;
  std::vector<double> log_probs;
};

inline double policy_log_prob(const PolicySpec& pol,
                              const std::vector<double>& x,
                              const std::vector<double>& y) {
  const std::vector<double> mean = pol.mean_action(x);
  double lp = 0.0;
  for (int j = 0; j < pol.da; ++j) {
    const double s = std::exp(pol.log_std[j]);
    const double t = (y[j] - mean[j]) / s;
    lp += -pol.log_std[j] - 0.5 * std::log(2.0 * kPi) - 0.5 * t * t;
  }
  return lp;
}

// Reparameterized sampling: y = mean + sigma * eps, one normal per action
// coordinate in order.
inline Rollout rollout(const PolicySpec& pol,
                       const std::vector<std::vector<double>>& contexts,
                       Rng& rng) {
  Rollout out;
  out.actions.reserve(contexts.size());
  out.log_probs.reserve(contexts.size());
  for (const auto& x : contexts) {
    std::vector<double> y = pol.mean_action(x);
    for (int j = 0; j < pol.da; ++j) {
      y[j] += std::exp(pol.log_std[j]) * rng.normal();
    }
    out.log_probs.push_back(policy_log_prob(pol, x, y));
    out.actions.push_back(std::move(y));
  }
  return out;
}

// One scored rollout sample. `shaped` feeds the policy gradient; the other
// fields exist for metrics.
struct ShapedSample {
  double shaped = 0.0;
  double proxy = 0.0;                // raw model reward
  std::optional<double> sigma;       // purm only
  std::optional<double> uncertainty; // purm with a gated-open tracker
};

// Applies the configured penalty. PURM samples are always pushed into the
// tracker and their uncertainty recorded when the gate is open, regardless
// of penalty kind, so switching the penalty off (or lambda to 0) cannot
// change anything else about the run.
inline ShapedSample shaped_reward(const Checkpoint& rm, RmKind kind,
                                  DistributionBuffer* tracker,
                                  const FeatureVector& phi,
                                  const RlConfig& cfg, Rng& rng) {
  ShapedSample s;
  if (kind == RmKind::kPurm) {
    const GaussianReward d = purm_forward(rm.model, phi);
    s.proxy = d.mu;
    s.sigma = d.sigma();
    if (tracker != nullptr) {
      tracker->push(d);
      if (auto u = tracker->uncertainty_of(d)) s.uncertainty = *u;
    }
    switch (cfg.penalty_kind) {
      case PenaltyKind::kNone:
        s.shaped = d.mu;
        break;
      case PenaltyKind::kBc:
        s.shaped = penalized_reward(d.mu, s.uncertainty.value_or(0.0),
                                    cfg.lambda);
        break;
      case PenaltyKind::kSigma:
        s.shaped = penalized_reward(d.mu, d.sigma(), cfg.lambda);
        break;
      case PenaltyKind::kSample:
        s.shaped = d.mu + d.sigma() * rng.normal();
        break;
    }
    return s;
  }
  if (cfg.penalty_kind != PenaltyKind::kNone) {
    throw ConfigError("shaped_reward: penalty '" +
                      penalty_kind_name(cfg.penalty_kind) +
                      "' requires the purm reward model");
  }
  if (kind == RmKind::kBtrm) {
    s.proxy = btrm_forward(rm.model, phi);
  } else {
    s.proxy = aggregate(ensemble_forward(rm.ensemble, phi),
                        aggregate_rule_of(kind), rm.ensemble.alpha);
  }
  s.shaped = s.proxy;
  return s;
}

// Mean closed-form KL(pi || ref) over the given contexts. For linear-Gaussian
// policies only the mean difference depends on x.
inline double policy_kl(const PolicySpec& pol, const PolicySpec& ref,
                        const std::vector<std::vector<double>>& contexts) {
  if (contexts.empty()) {
    throw std::invalid_argument("policy_kl: empty context batch");
  }
  double acc = 0.0;
  for (const auto& x : contexts) {
    const auto mp = pol.mean_action(x);
    const auto mr = ref.mean_action(x);
    for (int j = 0; j < pol.da; ++j) {
      const double sp = std::exp(pol.log_std[j]);
      const double sr = std::exp(ref.log_std[j]);
      const double dm = mp[j] - mr[j];
      acc += ref.log_std[j] - pol.log_std[j] +
             (sp * sp + dm * dm) / (2.0 * sr * sr) - 0.5;
    }
  }
  return acc / static_cast<double>(contexts.size());
}

struct PolicyGrad {
  std::vector<double> d_m;        // da x dc
  std::vector<double> d_m0;       // da
  std::vector<double> d_log_std;  // da

  explicit PolicyGrad(const PolicySpec& p)
      : d_m(p.m.size(), 0.0), d_m0(p.da, 0.0), d_log_std(p.da, 0.0) {}
};

// Gradient of the mean closed-form KL w.r.t. the current policy parameters.
inline PolicyGrad policy_kl_grad(const PolicySpec& pol, const PolicySpec& ref,
                                 const std::vector<std::vector<double>>& contexts) {
  if (contexts.empty()) {
    throw std::invalid_argument("policy_kl_grad: empty context batch");
  }
  PolicyGrad g(pol);
  const double inv_n = 1.0 / static_cast<double>(contexts.size());
  for (const auto& x : contexts) {
    const auto mp = pol.mean_action(x);
    const auto mr = ref.mean_action(x);
    for (int j = 0; j < pol.da; ++j) {
      const double sr = std::exp(ref.log_std[j]);
      const double coeff = (mp[j] - mr[j]) / (sr * sr) * inv_n;
      g.d_m0[j] += coeff;
      double* row = g.d_m.data() + static_cast<std::size_t>(j) * pol.dc;
      for (int c = 0; c < pol.dc; ++c) row[c] += coeff * x[c];
    }
  }
  for (int j = 0; j < pol.da; ++j) {
    const double sp = std::exp(pol.log_std[j]);
    const double sr = std::exp(ref.log_std[j]);
    g.d_log_std[j] = (sp * sp) / (sr * sr) - 1.0;
  }
  return g;
}

struct TransitionBatch {
  std::vector<std::vector<double>> contexts;
  std::vector<std::vector<double>> actions;
  std::vector<double> rewards;  // shaped
};

// One ascent step on E[(r - baseline) log pi] - beta KL, with the per-batch
// mean reward as baseline and the KL in closed form. log_std is re-clamped
// after the step.
inline void policy_update(PolicySpec& pol, const PolicySpec& ref,
                          const TransitionBatch& batch, double beta,
                          double lr) {
  const std::size_t n = batch.contexts.size();
  if (n == 0 || batch.actions.size() != n || batch.rewards.size() != n) {
    throw std::invalid_argument("policy_update: inconsistent batch");
  }
  double baseline = 0.0;
  for (double r : batch.rewards) baseline += r;
  baseline /= static_cast<double>(n);

  PolicyGrad g(pol);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = batch.contexts[i];
    const auto& y = batch.actions[i];
    const auto mean = pol.mean_action(x);
    const double adv = (batch.rewards[i] - baseline) * inv_n;
    for (int j = 0; j < pol.da; ++j) {
      const double s = std::exp(pol.log_std[j]);
      const double t = (y[j] - mean[j]) / (s * s);
      const double gm = adv * t;  // d log pi / d mean_j
      g.d_m0[j] += gm;
      double* row = g.d_m.data() + static_cast<std::size_t>(j) * pol.dc;
      for (int c = 0; c < pol.dc; ++c) row[c] += gm * x[c];
      const double u = (y[j] - mean[j]) / s;
      g.d_log_std[j] += adv * (u * u - 1.0);  // d log pi / d log_std_j
    }
  }
  const PolicyGrad kg = policy_kl_grad(pol, ref, batch.contexts);
  for (std::size_t i = 0; i < pol.m.size(); ++i) {
    pol.m[i] += lr * (g.d_m[i] - beta * kg.d_m[i]);
  }
  for (int j = 0; j < pol.da; ++j) {
    pol.m0[j] += lr * (g.d_m0[j] - beta * kg.d_m0[j]);
    pol.log_std[j] += lr * (g.d_log_std[j] - beta * kg.d_log_std[j]);
    pol.log_std[j] = std::clamp(pol.log_std[j], kLogStdMin, kLogStdMax);
  }
}

struct MetricsRow {
  int step = 0;
  double proxy_reward_mean = 0.0;
  double true_reward_mean = 0.0;
  double kl = 0.0;
  std::optional<double> uncertainty_mean;
};

struct RunMetrics {
  std::vector<MetricsRow> rows;
};

struct RunSummary {
  int effective_learning_step = 0;
  double peak_true_reward = 0.0;
  double final_true_reward = 0.0;
};

struct RunResult {
  RunMetrics metrics;
  RunSummary summary;
  std::uint64_t rm_hash_before = 0;
  std::uint64_t rm_hash_after = 0;
};

// Earliest step index attaining the maximum true reward.
inline int effective_learning_step(const RunMetrics& metrics) {
  if (metrics.rows.empty()) {
    throw std::invalid_argument("effective_learning_step: no rows");
  }
  int best = 0;
  for (std::size_t i = 1; i < metrics.rows.size(); ++i) {
    if (metrics.rows[i].true_reward_mean >
        metrics.rows[best].true_reward_mean) {
      best = static_cast<int>(i);
    }
  }
  return metrics.rows[best].step;
}

// Full single-seed experiment: build the environment, then per step evaluate
// true reward of the current policy mean on held-out contexts, roll out,
// score with the shaped reward, and update the policy. Deterministic given
// (cfg, seed).
inline RunResult run_experiment(const RlConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int d_phi = cfg.context_dim + 2 * cfg.action_dim;
  const WorldSpec world = make_world(seed, d_phi);
  const Environment env = build_environment(world, cfg);

  PolicySpec policy = PolicySpec::make(cfg.context_dim, cfg.action_dim,
                                       cfg.policy_log_std_init);
  const PolicySpec ref = policy;

  Rng eval_rng = Rng::derive(seed, 0x45564354ULL);
  std::vector<std::vector<double>> eval_contexts;
  eval_contexts.reserve(cfg.eval_contexts);
  for (int i = 0; i < cfg.eval_contexts; ++i) {
    std::vector<double> x(cfg.context_dim);
    for (double& v : x) v = eval_rng.uniform(-1.0, 1.0);
    eval_contexts.push_back(std::move(x));
  }

  const bool track = (cfg.rm_kind == RmKind::kPurm);
  DistributionBuffer tracker(cfg.buffer_initial, cfg.buffer_window);

  Rng loop_rng = Rng::derive(seed, 0x4C4F4F50ULL);
  RunResult result;
  result.rm_hash_before = env.rm_hash;
  result.metrics.rows.reserve(cfg.steps);

  for (int step = 0; step < cfg.steps; ++step) {
    MetricsRow row;
    row.step = step;

    double true_acc = 0.0;
    for (const auto& x : eval_contexts) {
      true_acc += env_true_reward(env, x, policy.mean_action(x));
    }
    row.true_reward_mean = true_acc / eval_contexts.size();

    std::vector<std::vector<double>> contexts;
    contexts.reserve(cfg.rollout_batch);
    for (int i = 0; i < cfg.rollout_batch; ++i) {
      std::vector<double> x(cfg.context_dim);
      for (double& v : x) v = loop_rng.uniform(-1.0, 1.0);
      contexts.push_back(std::move(x));
    }
    const Rollout ro = rollout(policy, contexts, loop_rng);

    TransitionBatch batch;
    batch.contexts = contexts;
    batch.actions = ro.actions;
    batch.rewards.reserve(contexts.size());
    double proxy_acc = 0.0;
    double u_acc = 0.0;
    int u_count = 0;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      const FeatureVector phi = rl_features(contexts[i], ro.actions[i]);
      const ShapedSample s = shaped_reward(env.rm, cfg.rm_kind,
                                           track ? &tracker : nullptr, phi,
                                           cfg, loop_rng);
      batch.rewards.push_back(s.shaped);
      proxy_acc += s.proxy;
      if (s.uncertainty) {
        u_acc += *s.uncertainty;
        ++u_count;
      }
    }
    row.proxy_reward_mean = proxy_acc / contexts.size();
    if (u_count > 0) row.uncertainty_mean = u_acc / u_count;

    row.kl = policy_kl(policy, ref, contexts);
    policy_update(policy, ref, batch, cfg.beta, cfg.policy_lr);
    result.metrics.rows.push_back(row);
  }

  result.rm_hash_after = checkpoint_hash(env.rm);
  result.summary.effective_learning_step =
      effective_learning_step(result.metrics);
  double peak = result.metrics.rows[0].true_reward_mean;
  for (const auto& row : result.metrics.rows) {
    peak = std::max(peak, row.true_reward_mean);
  }
  result.summary.peak_true_reward = peak;
  result.summary.final_true_reward =
      result.metrics.rows.back().true_reward_mean;
  return result;
}

}  // namespace purm
