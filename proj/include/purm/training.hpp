#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "purm/checkpoint.hpp"
#include "purm/dist_math.hpp"
#include "purm/reward_models.hpp"
#include "purm/synth_data.hpp"

namespace purm {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int steps = 2000;
  int mc_samples = 1000;
  PairLossVariant loss_variant = PairLossVariant::kLogOfMean;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int log_every = 100;  // 0 disables periodic evaluation

  void validate() const {
    if (!(learning_rate >= 0.0)) {
      throw std::invalid_argument("train: learning_rate must be >= 0");
    }
    if (steps < 1) throw std::invalid_argument("train: steps must be >= 1");
    if (batch_size < 1) {
      throw std::invalid_argument("train: batch_size must be >= 1");
    }
    if (mc_samples < 1) {
      throw std::invalid_argument("train: mc_samples must be >= 1");
    }
    if (log_every < 0) {
      throw std::invalid_argument("train: log_every must be >= 0");
    }
  }
};

struct ModelConfig {
  RmKind kind = RmKind::kPurm;
  int hidden = 32;
  int ensemble_k = 5;
  double alpha = 0.5;
};

struct EvalReport {
  double accuracy = 0.0;
  double nll = 0.0;
  int n_pairs = 0;
};

struct BatchLoss {
  double loss = 0.0;
  MlpParams grad;
};

// Epsilon stream for one training step; derived, never shared across steps.
inline std::uint64_t batch_noise_seed(std::uint64_t cfg_seed,
                                      std::uint64_t step) {
  return detail::splitmix64(cfg_seed ^
                            (0x4E4F4953ULL + step * 0x9E3779B97F4A7C15ULL));
}

// Mean preference loss over the batch with exact pathwise gradients under
// the epsilon draws of noise_seed (one derived sub-stream per record).
inline BatchLoss purm_batch_loss(const MlpParams& params,
                                 std::span<const PreferenceRecord> batch,
                                 const TrainConfig& cfg,
                                 std::uint64_t noise_seed) {
  if (batch.empty()) {
    throw std::invalid_argument("purm_batch_loss: empty batch");
  }
  if (params.out != 2) {
    throw std::invalid_argument("purm_batch_loss: model must have two heads");
  }
  BatchLoss out;
  out.grad = MlpParams::zeros(params.d, params.h, params.out);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const PreferenceRecord& rec = batch[r];
    const MlpActivation act_c = mlp_forward(params, rec.phi_chosen);
    const MlpActivation act_r = mlp_forward(params, rec.phi_rejected);

    const double ls_c_raw = act_c.output[1];
    const double ls_r_raw = act_r.output[1];
    const double ls_c = std::clamp(ls_c_raw, kLogSigmaMin, kLogSigmaMax);
    const double ls_r = std::clamp(ls_r_raw, kLogSigmaMin, kLogSigmaMax);
    const double sigma_c = std::exp(ls_c);
    const double sigma_r = std::exp(ls_r);
    const PairStatistic ps{act_c.output[0] - act_r.output[0],
                           std::hypot(sigma_c, sigma_r)};

    Rng noise = Rng::derive(noise_seed, r);
    const PairLossGrad g =
        pair_loss_value_and_grad(ps, cfg.loss_variant, cfg.mc_samples, noise);
    out.loss += g.loss * inv_n;

    // sigma_z = sqrt(sigma_c^2 + sigma_r^2), so
    // d sigma_z / d log sigma_c = sigma_c^2 / sigma_z; the clamp zeroes the
    // gradient at the rails.
    const double d_ls_c = (ls_c_raw > kLogSigmaMin && ls_c_raw < kLogSigmaMax)
                              ? g.d_sigma_z * (sigma_c * sigma_c / ps.sigma_z)
                              : 0.0;
    const double d_ls_r = (ls_r_raw > kLogSigmaMin && ls_r_raw < kLogSigmaMax)
                              ? g.d_sigma_z * (sigma_r * sigma_r / ps.sigma_z)
                              : 0.0;
    const std::vector<double> gc{g.d_mu_z * inv_n, d_ls_c * inv_n};
    const std::vector<double> gr{-g.d_mu_z * inv_n, d_ls_r * inv_n};
    mlp_backward(params, rec.phi_chosen, act_c, gc, out.grad);
    mlp_backward(params, rec.phi_rejected, act_r, gr, out.grad);
  }
  return out;
}

// Plain preference loss: mean of -log sigmoid(r_chosen - r_rejected).
inline BatchLoss btrm_batch_loss(const MlpParams& params,
                                 std::span<const PreferenceRecord> batch) {
  if (batch.empty()) {
    throw std::invalid_argument("btrm_batch_loss: empty batch");
  }
  if (params.out != 1) {
    throw std::invalid_argument("btrm_batch_loss: model must have one head");
  }
  BatchLoss out;
  out.grad = MlpParams::zeros(params.d, params.h, params.out);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const PreferenceRecord& rec : batch) {
    const MlpActivation act_c = mlp_forward(params, rec.phi_chosen);
    const MlpActivation act_r = mlp_forward(params, rec.phi_rejected);
    const double margin = act_c.output[0] - act_r.output[0];
    out.loss += softplus(-margin) * inv_n;
    const double g = (sigmoid(margin) - 1.0) * inv_n;
    mlp_backward(params, rec.phi_chosen, act_c, {g}, out.grad);
    mlp_backward(params, rec.phi_rejected, act_r, {-g}, out.grad);
  }
  return out;
}

// Deterministic metrics: PURM probability via quadrature, BTRM/BTE via the
// sigmoid of the (aggregated) margin. Ties at p = 0.5 count as incorrect.
inline EvalReport evaluate(const Checkpoint& ckpt, RmKind kind,
                           const std::vector<PreferenceRecord>& dataset) {
  if (dataset.empty()) {
    throw std::invalid_argument("evaluate: empty dataset");
  }
  const bool ens = is_ensemble_kind(kind);
  if ((ens && ckpt.kind != "bte") ||
      (kind == RmKind::kPurm && ckpt.kind != "purm") ||
      (kind == RmKind::kBtrm && ckpt.kind != "btrm")) {
    throw std::invalid_argument("evaluate: kind does not match checkpoint");
  }
  const AggregateRule rule = aggregate_rule_of(kind);
  int correct = 0;
  double nll = 0.0;
  for (const PreferenceRecord& rec : dataset) {
    if (kind == RmKind::kPurm) {
      const GaussianReward c = purm_forward(ckpt.model, rec.phi_chosen);
      const GaussianReward r = purm_forward(ckpt.model, rec.phi_rejected);
      const double p = likelihood_quadrature(pair_statistic(c, r));
      if (p > 0.5) ++correct;
      nll += -std::log(p);
    } else {
      double margin;
      if (ens) {
        const double rc = aggregate(ensemble_forward(ckpt.ensemble, rec.phi_chosen),
                                    rule, ckpt.ensemble.alpha);
        const double rr = aggregate(
            ensemble_forward(ckpt.ensemble, rec.phi_rejected), rule,
            ckpt.ensemble.alpha);
        margin = rc - rr;
      } else {
        margin = btrm_forward(ckpt.model, rec.phi_chosen) -
                 btrm_forward(ckpt.model, rec.phi_rejected);
      }
      if (margin > 0.0) ++correct;
      nll += softplus(-margin);  // = -log sigmoid(margin)
    }
  }
  EvalReport rep;
  rep.n_pairs = static_cast<int>(dataset.size());
  rep.accuracy = static_cast<double>(correct) / rep.n_pairs;
  rep.nll = nll / rep.n_pairs;
  return rep;
}

struct TrainRow {
  int step = 0;
  double loss = 0.0;
  std::optional<double> accuracy;
  std::optional<double> nll;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainRow> history;  // one row per step
};

namespace detail {

// Adam with bias correction over a flat parameter vector.
class AdamState {
 public:
  explicit AdamState(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad,
            const TrainConfig& cfg) {
    ++t_;
    const double corr1 = 1.0 - std::pow(cfg.adam_beta1, t_);
    const double corr2 = 1.0 - std::pow(cfg.adam_beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg.adam_beta1 * m_[i] + (1.0 - cfg.adam_beta1) * grad[i];
      v_[i] = cfg.adam_beta2 * v_[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
      const double mhat = m_[i] / corr1;
      const double vhat = v_[i] / corr2;
      params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }

 private:
  std::vector<double> m_, v_;
  int t_ = 0;
};

// One independently seeded optimizer lane. Ensemble members run in lockstep
// (one lane each) but never share state, so member i's training cannot touch
// member j.
struct TrainLane {
  MlpParams params;
  std::vector<double> flat;
  AdamState adam;
  std::vector<PreferenceRecord> pool;
  std::size_t cursor = 0;
  Rng shuffle_rng;
  std::uint64_t noise_tag = 0;

  TrainLane(MlpParams init, const std::vector<PreferenceRecord>& dataset,
            std::uint64_t lane_seed)
      : params(std::move(init)),
        flat(params.flatten()),
        adam(params.n_params()),
        pool(dataset),
        cursor(dataset.size()),  // forces an initial shuffle
        shuffle_rng(Rng::derive(lane_seed, 0x53485546ULL)),
        noise_tag(lane_seed) {}

  std::span<const PreferenceRecord> next_batch(int batch_size) {
    const std::size_t want =
        std::min(static_cast<std::size_t>(batch_size), pool.size());
    if (cursor + want > pool.size()) {
      shuffle_rng.shuffle(pool);
      cursor = 0;
    }
    const std::span<const PreferenceRecord> batch(pool.data() + cursor, want);
    cursor += want;
    return batch;
  }
};

}  // namespace detail

// MLE training for any model kind. Deterministic given cfg.seed; the loss
// history has exactly cfg.steps rows (mean across members for ensembles),
// with accuracy/NLL filled in every log_every steps.
inline TrainResult train(const ModelConfig& mc,
                         const std::vector<PreferenceRecord>& dataset,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const int d = static_cast<int>(dataset[0].phi_chosen.size());
  if (d < 1) throw std::invalid_argument("train: zero-dimensional features");
  for (const PreferenceRecord& rec : dataset) {
    if (static_cast<int>(rec.phi_chosen.size()) != d ||
        static_cast<int>(rec.phi_rejected.size()) != d) {
      throw std::invalid_argument("train: inconsistent feature dimensions");
    }
  }

  const bool purm_kind = (mc.kind == RmKind::kPurm);
  const bool ens = is_ensemble_kind(mc.kind);
  const int lanes_n = ens ? mc.ensemble_k : 1;

  std::vector<detail::TrainLane> lanes;
  lanes.reserve(lanes_n);
  for (int i = 0; i < lanes_n; ++i) {
    const std::uint64_t lane_seed =
        detail::splitmix64(cfg.seed ^ (0x1A5E0000ULL + i));
    MlpParams init;
    if (purm_kind) {
      init = init_purm_params(d, mc.hidden, lane_seed);
    } else {
      init = init_btrm_params(d, mc.hidden, lane_seed);
    }
    lanes.emplace_back(std::move(init), dataset, lane_seed);
  }

  const auto snapshot = [&]() {
    Checkpoint c;
    c.seed = cfg.seed;
    if (ens) {
      c.kind = "bte";
      c.ensemble.alpha = mc.alpha;
      c.ensemble.members.clear();
      for (const auto& lane : lanes) c.ensemble.members.push_back(lane.params);
    } else {
      c.kind = purm_kind ? "purm" : "btrm";
      c.model = lanes[0].params;
    }
    return c;
  };

  TrainResult result;
  result.history.reserve(cfg.steps);
  for (int step = 0; step < cfg.steps; ++step) {
    double mean_loss = 0.0;
    for (auto& lane : lanes) {
      const auto batch = lane.next_batch(cfg.batch_size);
      const std::uint64_t noise_seed =
          batch_noise_seed(lane.noise_tag, static_cast<std::uint64_t>(step));
      const BatchLoss bl = purm_kind
                               ? purm_batch_loss(lane.params, batch, cfg,
                                                 noise_seed)
                               : btrm_batch_loss(lane.params, batch);
      mean_loss += bl.loss / lanes_n;
      lane.adam.step(lane.flat, bl.grad.flatten(), cfg);
      lane.params.assign_flat(lane.flat);
    }
    TrainRow row;
    row.step = step;
    row.loss = mean_loss;
    if (cfg.log_every > 0 && (step + 1) % cfg.log_every == 0) {
      const EvalReport rep = evaluate(snapshot(), mc.kind, dataset);
      row.accuracy = rep.accuracy;
      row.nll = rep.nll;
    }
    result.history.push_back(row);
  }
  result.checkpoint = snapshot();
  return result;
}

}  // namespace purm
