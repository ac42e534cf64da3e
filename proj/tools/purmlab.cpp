// purmlab: config-driven experiment harness around the purm library.
// Commands: gen-data, train-rm, eval-rm, uncertainty-eval, run-rl, report.
// Exit codes: 0 success, 1 runtime/data error, 2 usage/config error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "purm/config.hpp"
#include "purm/io.hpp"
#include "purm/rl.hpp"
#include "purm/synth_data.hpp"
#include "purm/training.hpp"
#include "purm/uncertainty.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

void note(const GlobalArgs& g, const std::string& msg) {
  if (g.verbose) std::cerr << "purmlab: " << msg << "\n";
}

purm::ExperimentConfig require_config(const GlobalArgs& g) {
  if (g.config_path.empty()) {
    throw purm::ConfigError("--config is required for this command");
  }
  purm::ExperimentConfig cfg = purm::load_experiment_config(g.config_path);
  if (g.seed) {
    // One flag pins every stream: section seeds become disjoint derivations
    // of the override so no two stages share a generator.
    cfg.world.seed = *g.seed;
    cfg.data.seed = purm::detail::splitmix64(*g.seed ^ 0x44415441ULL);
    cfg.train.seed = purm::detail::splitmix64(*g.seed ^ 0x54524E00ULL);
    cfg.seeds = {*g.seed};
    cfg.rl.seeds = cfg.seeds;
  }
  return cfg;
}

fs::path resolve_out(const GlobalArgs& g, const purm::ExperimentConfig& cfg,
                     const std::string& default_name) {
  if (!g.out.empty()) return fs::path(g.out);
  return fs::path(cfg.output) / default_name;
}

void ensure_parent_dir(const fs::path& p) {
  const fs::path dir = p.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
}

std::vector<purm::PreferenceRecord> generate_records(
    const purm::WorldSpec& world, const purm::DataConfig& data) {
  purm::Rng rng = purm::Rng::derive(data.seed, 0x47454E44ULL);
  std::vector<purm::PreferenceRecord> records;
  if (data.shift.offset == 0.0 && data.shift.scale == 1.0) {
    records = purm::sample_pairs(world, data.n, rng, data.label_mode);
  } else {
    const purm::FeatureShift shift = purm::FeatureShift::uniform_offset(
        world.d, data.shift.offset, data.shift.scale);
    auto features = purm::sample_shifted_features(world, shift, 2 * data.n, rng);
    records.reserve(data.n);
    for (int i = 0; i < data.n; ++i) {
      purm::FeatureVector a = std::move(features[2 * i]);
      purm::FeatureVector b = std::move(features[2 * i + 1]);
      const double margin =
          purm::true_reward(world, a) - purm::true_reward(world, b);
      const bool a_chosen = data.label_mode == purm::LabelMode::kArgmax
                                ? margin >= 0.0
                                : rng.uniform() < purm::sigmoid(margin);
      purm::PreferenceRecord rec;
      rec.phi_chosen = a_chosen ? std::move(a) : std::move(b);
      rec.phi_rejected = a_chosen ? std::move(b) : std::move(a);
      records.push_back(std::move(rec));
    }
  }
  if (data.reversal_ratio > 0.0) {
    purm::Rng rev_rng = purm::Rng::derive(data.seed, 0x52455652ULL);
    purm::inject_reversal(records, data.reversal_ratio, rev_rng);
  }
  return records;
}

int cmd_gen_data(const GlobalArgs& g) {
  const purm::ExperimentConfig cfg = require_config(g);
  const purm::WorldSpec world = purm::make_world(cfg.world.seed, cfg.world.d);
  const auto records = generate_records(world, cfg.data);
  purm::DatasetMeta meta;
  meta.world_seed = cfg.world.seed;
  meta.n = cfg.data.n;
  meta.reversal_ratio = cfg.data.reversal_ratio;
  meta.shift = cfg.data.shift.name();
  const fs::path out = resolve_out(g, cfg, "dataset.jsonl");
  ensure_parent_dir(out);
  purm::save_dataset(records, meta, out.string());
  note(g, "wrote " + out.string() + " (" + std::to_string(records.size()) +
              " records)");
  return 0;
}

std::string train_log_csv(const std::vector<purm::TrainRow>& history) {
  std::ostringstream out;
  out << "step,loss,accuracy,nll\n";
  for (const auto& row : history) {
    out << row.step << ',' << purm::format_double(row.loss) << ',';
    if (row.accuracy) out << purm::format_double(*row.accuracy);
    out << ',';
    if (row.nll) out << purm::format_double(*row.nll);
    out << '\n';
  }
  return out.str();
}

int cmd_train_rm(const GlobalArgs& g, const std::string& data_path) {
  const purm::ExperimentConfig cfg = require_config(g);
  const auto [records, meta] = purm::load_dataset(data_path);
  note(g, "training " + purm::rm_kind_name(cfg.model.kind) + " on " +
              std::to_string(records.size()) + " records");
  const purm::TrainResult result = purm::train(cfg.model, records, cfg.train);
  const fs::path out_dir = g.out.empty() ? fs::path(cfg.output) : fs::path(g.out);
  fs::create_directories(out_dir);
  purm::save_checkpoint(result.checkpoint,
                        (out_dir / "checkpoint.json").string());
  purm::write_text_file((out_dir / "train_log.csv").string(),
                        train_log_csv(result.history));
  note(g, "wrote " + (out_dir / "checkpoint.json").string());
  return 0;
}

int cmd_eval_rm(const GlobalArgs& g, const std::string& checkpoint_path,
                const std::string& data_path) {
  const purm::Checkpoint ckpt = purm::load_checkpoint(checkpoint_path);
  const auto [records, meta] = purm::load_dataset(data_path);
  const purm::RmKind kind = purm::parse_rm_kind(ckpt.kind);
  const purm::EvalReport report = purm::evaluate(ckpt, kind, records);
  const nlohmann::json j{{"accuracy", report.accuracy},
                         {"nll", report.nll},
                         {"n_pairs", report.n_pairs}};
  const std::string text = j.dump() + "\n";
  std::cout << text;
  if (!g.out.empty()) {
    ensure_parent_dir(fs::path(g.out));
    purm::write_text_file(g.out, text);
  }
  return 0;
}

// Predicted reward distributions for the features of the first eval_n
// records (both sides). Reversal swaps sides within a pair, so this feature
// set is invariant across the rho grid.
std::vector<purm::GaussianReward> predict_on_records(
    const purm::MlpParams& params,
    const std::vector<purm::PreferenceRecord>& records, int eval_n) {
  std::vector<purm::GaussianReward> dists;
  const std::size_t limit =
      std::min<std::size_t>(records.size(), static_cast<std::size_t>(eval_n));
  dists.reserve(2 * limit);
  for (std::size_t i = 0; i < limit; ++i) {
    dists.push_back(purm::purm_forward(params, records[i].phi_chosen));
    dists.push_back(purm::purm_forward(params, records[i].phi_rejected));
  }
  return dists;
}

int cmd_uncertainty_eval(const GlobalArgs& g) {
  const purm::ExperimentConfig cfg = require_config(g);
  const purm::WorldSpec world = purm::make_world(cfg.world.seed, cfg.world.d);
  purm::DataConfig clean = cfg.data;
  clean.reversal_ratio = 0.0;
  const auto base_records = generate_records(world, clean);

  purm::ModelConfig purm_model = cfg.model;
  purm_model.kind = purm::RmKind::kPurm;
  purm::TrainConfig tc = cfg.train;
  tc.log_every = 0;

  const fs::path out_dir = g.out.empty() ? fs::path(cfg.output) : fs::path(g.out);
  fs::create_directories(out_dir);

  // Aleatoric sweep: one model per label-noise level, same base data.
  std::ostringstream aleatoric;
  aleatoric << "rho,dataset_uncertainty\n";
  for (std::size_t i = 0; i < cfg.uncertainty.rho_grid.size(); ++i) {
    const double rho = cfg.uncertainty.rho_grid[i];
    auto records = base_records;
    if (rho > 0.0) {
      purm::Rng rev_rng = purm::Rng::derive(cfg.data.seed, 0x52455600ULL + i);
      purm::inject_reversal(records, rho, rev_rng);
    }
    const purm::TrainResult tr = purm::train(purm_model, records, tc);
    const auto dists = predict_on_records(tr.checkpoint.model, records,
                                          cfg.uncertainty.eval_n);
    const double u = purm::dataset_uncertainty(dists);
    aleatoric << purm::format_double(rho) << ','
              << purm::format_double(u) << '\n';
    note(g, "aleatoric rho=" + std::to_string(rho) + " u=" +
                std::to_string(u));
  }
  purm::write_text_file((out_dir / "aleatoric.csv").string(),
                        aleatoric.str());

  // Epistemic eval: one clean model per kind, probed at growing feature
  // shifts. Offset 0 is the in-domain reference row.
  const purm::TrainResult purm_tr = purm::train(purm_model, base_records, tc);
  purm::ModelConfig bte_model = cfg.model;
  bte_model.kind = purm::RmKind::kBteMean;
  const purm::TrainResult bte_tr = purm::train(bte_model, base_records, tc);

  std::ostringstream epistemic;
  epistemic << "offset,purm_uncertainty,ensemble_std\n";
  for (std::size_t i = 0; i < cfg.uncertainty.shift_offsets.size(); ++i) {
    const double offset = cfg.uncertainty.shift_offsets[i];
    const purm::FeatureShift shift =
        purm::FeatureShift::uniform_offset(world.d, offset, 1.0);
    purm::Rng probe_rng = purm::Rng::derive(cfg.data.seed, 0x45504900ULL + i);
    const auto probes = purm::sample_shifted_features(
        world, shift, cfg.uncertainty.eval_n, probe_rng);
    std::vector<purm::GaussianReward> dists;
    double std_acc = 0.0;
    dists.reserve(probes.size());
    for (const purm::FeatureVector& phi : probes) {
      dists.push_back(purm::purm_forward(purm_tr.checkpoint.model, phi));
      std_acc += purm::ensemble_uncertainty(
          purm::ensemble_forward(bte_tr.checkpoint.ensemble, phi));
    }
    epistemic << purm::format_double(offset) << ','
              << purm::format_double(purm::dataset_uncertainty(dists)) << ','
              << purm::format_double(std_acc / cfg.uncertainty.eval_n)
              << '\n';
  }
  purm::write_text_file((out_dir / "epistemic.csv").string(),
                        epistemic.str());
  note(g, "wrote " + (out_dir / "aleatoric.csv").string() + ", " +
              (out_dir / "epistemic.csv").string());
  return 0;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_run_rl(const GlobalArgs& g) {
  const purm::ExperimentConfig cfg = require_config(g);
  const fs::path out_dir = g.out.empty() ? fs::path(cfg.output) : fs::path(g.out);
  fs::create_directories(out_dir);

  nlohmann::json runs = nlohmann::json::array();
  std::vector<double> eff, peak, fin;
  for (const std::uint64_t seed : cfg.rl.seeds) {
    note(g, "rl run seed=" + std::to_string(seed));
    const purm::RunResult result = purm::run_experiment(cfg.rl, seed);
    const std::string tag = "seed" + std::to_string(seed);
    purm::write_text_file((out_dir / ("metrics_" + tag + ".csv")).string(),
                          purm::metrics_to_csv(result.metrics));
    purm::write_text_file((out_dir / ("summary_" + tag + ".json")).string(),
                          purm::summary_to_json(result.summary).dump(2) + "\n");
    runs.push_back(
        {{"seed", seed},
         {"effective_learning_step", result.summary.effective_learning_step},
         {"peak_true_reward", result.summary.peak_true_reward},
         {"final_true_reward", result.summary.final_true_reward}});
    eff.push_back(result.summary.effective_learning_step);
    peak.push_back(result.summary.peak_true_reward);
    fin.push_back(result.summary.final_true_reward);
  }
  const nlohmann::json aggregate{
      {"median_effective_learning_step", median_of(eff)},
      {"median_peak_true_reward", median_of(peak)},
      {"median_final_true_reward", median_of(fin)},
      {"runs", runs}};
  purm::write_text_file((out_dir / "summary.json").string(),
                        aggregate.dump(2) + "\n");
  note(g, "wrote " + (out_dir / "summary.json").string());
  return 0;
}

int cmd_report(const GlobalArgs& g, const std::string& run_dir) {
  if (!fs::is_directory(run_dir)) {
    throw purm::DataError("report: not a directory: " + run_dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("metrics_", 0) == 0 &&
        entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw purm::DataError("report: no metrics_*.csv files in " + run_dir);
  }
  std::sort(files.begin(), files.end());

  std::ostringstream md;
  md << "| run | effective_learning_step | peak_true_reward | "
        "final_true_reward |\n";
  md << "|---|---|---|---|\n";
  std::vector<double> eff, peak, fin;
  for (const auto& f : files) {
    const purm::RunMetrics metrics =
        purm::parse_metrics_csv(purm::read_text_file(f.string()), f.string());
    if (metrics.rows.empty()) {
      throw purm::DataError("report: no rows in " + f.string());
    }
    const int e = purm::effective_learning_step(metrics);
    double p = metrics.rows[0].true_reward_mean;
    for (const auto& r : metrics.rows) p = std::max(p, r.true_reward_mean);
    const double fl = metrics.rows.back().true_reward_mean;
    md << "| " << f.stem().string() << " | " << e << " | "
       << purm::format_double(p) << " | " << purm::format_double(fl)
       << " |\n";
    eff.push_back(e);
    peak.push_back(p);
    fin.push_back(fl);
  }
  md << "| median | " << purm::format_double(median_of(eff)) << " | "
     << purm::format_double(median_of(peak)) << " | "
     << purm::format_double(median_of(fin)) << " |\n";
  std::cout << md.str();
  if (!g.out.empty()) {
    ensure_parent_dir(fs::path(g.out));
    purm::write_text_file(g.out, md.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"purm laboratory: synthetic preference worlds, uncertain "
               "reward models, and uncertainty-penalized policy runs"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  std::uint64_t seed_value = 0;
  auto* seed_opt =
      app.add_option("--seed", seed_value,
                     "Override every config seed from one value");
  app.add_option("--config", g.config_path, "Experiment config (JSON)");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_flag("--verbose", g.verbose, "Progress notes on stderr");

  auto* gen = app.add_subcommand("gen-data", "Write a preference dataset");
  auto* train = app.add_subcommand("train-rm", "Train a reward model");
  std::string data_path;
  train->add_option("--data", data_path, "Dataset file (JSONL)")->required();
  auto* eval = app.add_subcommand("eval-rm", "Evaluate a checkpoint");
  std::string ckpt_path, eval_data_path;
  eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  eval->add_option("--data", eval_data_path, "Dataset file (JSONL)")
      ->required();
  auto* unc = app.add_subcommand("uncertainty-eval",
                                 "Aleatoric sweep and epistemic probes");
  auto* rl = app.add_subcommand("run-rl", "Policy optimization runs per seed");
  auto* rep = app.add_subcommand("report", "Summarize a run directory");
  std::string run_dir;
  rep->add_option("run_dir", run_dir, "Directory with metrics_*.csv")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (gen->parsed()) return cmd_gen_data(g);
    if (train->parsed()) return cmd_train_rm(g, data_path);
    if (eval->parsed()) return cmd_eval_rm(g, ckpt_path, eval_data_path);
    if (unc->parsed()) return cmd_uncertainty_eval(g);
    if (rl->parsed()) return cmd_run_rl(g);
    if (rep->parsed()) return cmd_report(g, run_dir);
  } catch (const purm::ConfigError& e) {
    std::cerr << "purmlab: " << e.what() << "\n";
    return 2;
  } catch (const purm::DataError& e) {
    std::cerr << "purmlab: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "purmlab: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
