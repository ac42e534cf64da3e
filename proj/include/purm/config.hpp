#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "purm/errors.hpp"
#include "purm/rl.hpp"
#include "purm/synth_data.hpp"
#include "purm/training.hpp"

namespace purm {

struct WorldConfig {
  std::uint64_t seed = 1;
  int d = 8;
};

struct ShiftConfig {
  double offset = 0.0;
  double scale = 1.0;

  std::string name() const {
    if (offset == 0.0 && scale == 1.0) return "none";
    return "offset=" + std::to_string(offset) +
           ",scale=" + std::to_string(scale);
  }
};

struct DataConfig {
  int n = 2000;
  double reversal_ratio = 0.0;
  ShiftConfig shift;
  LabelMode label_mode = LabelMode::kBernoulli;
  std::uint64_t seed = 2;
};

struct UncertaintyConfig {
  int initial_size = 100;
  std::int64_t window = 1000000;
  std::vector<double> rho_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                  0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> shift_offsets = {0.0, 1.0, 2.0, 3.0};
  int eval_n = 500;
};

struct ExperimentConfig {
  WorldConfig world;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  UncertaintyConfig uncertainty;
  RlConfig rl;
  std::string output = "out";
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  void validate() const;
};

namespace detail {

inline void expect_keys(const nlohmann::json& j, const std::string& section,
                        std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError("config: section '" + section + "' must be an object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("config: unknown key '" + item.key() +
                        "' in section '" + section + "'");
    }
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
}

inline void read_seed(const nlohmann::json& j, const char* key,
                      std::uint64_t& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
  if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
    throw ConfigError(std::string("config: '") + key +
                      "' must be nonnegative");
  }
  out = v.get<std::uint64_t>();
}

inline std::string read_string(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) {
    throw ConfigError(std::string("config: '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

}  // namespace detail

inline PairLossVariant parse_loss_variant(const std::string& s) {
  if (s == "log_of_mean") return PairLossVariant::kLogOfMean;
  if (s == "mean_of_log") return PairLossVariant::kMeanOfLog;
  throw ConfigError("unknown loss variant: '" + s + "'");
}

inline std::string loss_variant_name(PairLossVariant v) {
  return v == PairLossVariant::kLogOfMean ? "log_of_mean" : "mean_of_log";
}

inline LabelMode parse_label_mode(const std::string& s) {
  if (s == "bernoulli") return LabelMode::kBernoulli;
  if (s == "argmax") return LabelMode::kArgmax;
  throw ConfigError("unknown label mode: '" + s + "'");
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  detail::expect_keys(j, "<root>",
                      {"world", "data", "model", "train", "uncertainty", "rl",
                       "output", "seeds"});
  ExperimentConfig cfg;

  if (j.contains("world")) {
    const auto& w = j.at("world");
    detail::expect_keys(w, "world", {"seed", "d"});
    detail::read_seed(w, "seed", cfg.world.seed);
    detail::read_field(w, "d", cfg.world.d);
  }

  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::expect_keys(
        d, "data", {"n", "reversal_ratio", "shift", "label_mode", "seed"});
    detail::read_field(d, "n", cfg.data.n);
    detail::read_field(d, "reversal_ratio", cfg.data.reversal_ratio);
    if (d.contains("shift")) {
      const auto& s = d.at("shift");
      detail::expect_keys(s, "data.shift", {"offset", "scale"});
      detail::read_field(s, "offset", cfg.data.shift.offset);
      detail::read_field(s, "scale", cfg.data.shift.scale);
    }
    if (d.contains("label_mode")) {
      cfg.data.label_mode = parse_label_mode(detail::read_string(d, "label_mode"));
    }
    detail::read_seed(d, "seed", cfg.data.seed);
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::expect_keys(m, "model", {"kind", "hidden", "ensemble_k", "alpha"});
    if (m.contains("kind")) {
      cfg.model.kind = parse_rm_kind(detail::read_string(m, "kind"));
    }
    detail::read_field(m, "hidden", cfg.model.hidden);
    detail::read_field(m, "ensemble_k", cfg.model.ensemble_k);
    detail::read_field(m, "alpha", cfg.model.alpha);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::expect_keys(t, "train",
                        {"learning_rate", "batch_size", "steps", "mc_samples",
                         "loss_variant", "seed", "log_every"});
    detail::read_field(t, "learning_rate", cfg.train.learning_rate);
    detail::read_field(t, "batch_size", cfg.train.batch_size);
    detail::read_field(t, "steps", cfg.train.steps);
    detail::read_field(t, "mc_samples", cfg.train.mc_samples);
    if (t.contains("loss_variant")) {
      cfg.train.loss_variant =
          parse_loss_variant(detail::read_string(t, "loss_variant"));
    }
    detail::read_seed(t, "seed", cfg.train.seed);
    detail::read_field(t, "log_every", cfg.train.log_every);
  }

  if (j.contains("uncertainty")) {
    const auto& u = j.at("uncertainty");
    detail::expect_keys(
        u, "uncertainty",
        {"initial_size", "window", "rho_grid", "shift_offsets", "eval_n"});
    detail::read_field(u, "initial_size", cfg.uncertainty.initial_size);
    detail::read_field(u, "window", cfg.uncertainty.window);
    detail::read_field(u, "rho_grid", cfg.uncertainty.rho_grid);
    detail::read_field(u, "shift_offsets", cfg.uncertainty.shift_offsets);
    detail::read_field(u, "eval_n", cfg.uncertainty.eval_n);
  }

  if (j.contains("rl")) {
    const auto& r = j.at("rl");
    detail::expect_keys(
        r, "rl",
        {"rm_kind", "penalty_kind", "lambda", "beta", "steps",
         "rollout_batch", "buffer_initial", "buffer_window", "context_dim",
         "action_dim", "policy_lr", "policy_log_std_init", "oob_decay",
         "rm_pairs", "eval_contexts", "rm_hidden", "rm_train_steps",
         "rm_mc_samples", "rm_learning_rate", "rm_batch_size", "ensemble_k",
         "alpha"});
    if (r.contains("rm_kind")) {
      cfg.rl.rm_kind = parse_rm_kind(detail::read_string(r, "rm_kind"));
    }
    if (r.contains("penalty_kind")) {
      cfg.rl.penalty_kind =
          parse_penalty_kind(detail::read_string(r, "penalty_kind"));
    }
    detail::read_field(r, "lambda", cfg.rl.lambda);
    detail::read_field(r, "beta", cfg.rl.beta);
    detail::read_field(r, "steps", cfg.rl.steps);
    detail::read_field(r, "rollout_batch", cfg.rl.rollout_batch);
    detail::read_field(r, "buffer_initial", cfg.rl.buffer_initial);
    detail::read_field(r, "buffer_window", cfg.rl.buffer_window);
    detail::read_field(r, "context_dim", cfg.rl.context_dim);
    detail::read_field(r, "action_dim", cfg.rl.action_dim);
    detail::read_field(r, "policy_lr", cfg.rl.policy_lr);
    detail::read_field(r, "policy_log_std_init", cfg.rl.policy_log_std_init);
    detail::read_field(r, "oob_decay", cfg.rl.oob_decay);
    detail::read_field(r, "rm_pairs", cfg.rl.rm_pairs);
    detail::read_field(r, "eval_contexts", cfg.rl.eval_contexts);
    detail::read_field(r, "rm_hidden", cfg.rl.model.hidden);
    detail::read_field(r, "ensemble_k", cfg.rl.model.ensemble_k);
    detail::read_field(r, "alpha", cfg.rl.model.alpha);
    detail::read_field(r, "rm_train_steps", cfg.rl.rm_train.steps);
    detail::read_field(r, "rm_mc_samples", cfg.rl.rm_train.mc_samples);
    detail::read_field(r, "rm_learning_rate", cfg.rl.rm_train.learning_rate);
    detail::read_field(r, "rm_batch_size", cfg.rl.rm_train.batch_size);
  }

  detail::read_field(j, "output", cfg.output);
  if (j.contains("seeds")) {
    try {
      cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: 'seeds' must be a list of nonnegative integers");
    }
  }
  cfg.rl.seeds = cfg.seeds;
  cfg.validate();
  return cfg;
}

inline void ExperimentConfig::validate() const {
  if (world.d < 1) throw ConfigError("config: world.d must be >= 1");
  if (data.n < 1) throw ConfigError("config: data.n must be >= 1");
  if (data.reversal_ratio < 0.0 || data.reversal_ratio > 1.0) {
    throw ConfigError("config: data.reversal_ratio must be in [0, 1]");
  }
  if (data.shift.scale < 0.0) {
    throw ConfigError("config: data.shift.scale must be >= 0");
  }
  if (model.hidden < 1) throw ConfigError("config: model.hidden must be >= 1");
  if (model.ensemble_k < 2 && is_ensemble_kind(model.kind)) {
    throw ConfigError("config: model.ensemble_k must be >= 2");
  }
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (uncertainty.initial_size < 1 || uncertainty.window < 1) {
    throw ConfigError("config: uncertainty gate and window must be >= 1");
  }
  if (uncertainty.rho_grid.empty()) {
    throw ConfigError("config: uncertainty.rho_grid must be nonempty");
  }
  for (double rho : uncertainty.rho_grid) {
    if (rho < 0.0 || rho > 1.0) {
      throw ConfigError("config: uncertainty.rho_grid entries must be in [0, 1]");
    }
  }
  if (uncertainty.eval_n < 2) {
    throw ConfigError("config: uncertainty.eval_n must be >= 2");
  }
  if (output.empty()) throw ConfigError("config: output must be nonempty");
  if (seeds.empty()) throw ConfigError("config: seeds must be nonempty");
  rl.validate();
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace purm
