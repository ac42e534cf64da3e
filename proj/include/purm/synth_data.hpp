#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "purm/dist_math.hpp"
#include "purm/errors.hpp"
#include "purm/mlp.hpp"

namespace purm {

// Ground-truth preference world. The true reward is a random tanh bottleneck
//   r*(phi) = w . tanh(U phi) + b
// bounded everywhere by sum |w_i|, so a trained model that extrapolates past
// the in-domain box can overshoot it.
struct WorldSpec {
  int d = 0;
  std::vector<double> u;  // d x d mixing matrix, row-major
  std::vector<double> w;  // d
  double b = 0.0;
  std::vector<double> box_center;     // in-domain sampling box
  std::vector<double> box_halfwidth;  // per-coordinate, > 0
  std::uint64_t seed = 0;
};

// U entries are N(0, 1/d) (standard deviation 1/sqrt(d)) so U*phi has O(1)
// coordinates inside the unit box; w ~ N(0,1), b = 0, box = [-1, 1]^d.
inline WorldSpec make_world(std::uint64_t seed, int d) {
  if (d < 1) throw std::invalid_argument("make_world: d must be >= 1");
  WorldSpec world;
  world.d = d;
  world.seed = seed;
  Rng rng = Rng::derive(seed, 0x574F524CULL);
  const double u_std = 1.0 / std::sqrt(static_cast<double>(d));
  world.u.resize(static_cast<std::size_t>(d) * d);
  for (double& v : world.u) v = rng.normal(0.0, u_std);
  world.w.resize(d);
  for (double& v : world.w) v = rng.normal();
  world.b = 0.0;
  world.box_center.assign(d, 0.0);
  world.box_halfwidth.assign(d, 1.0);
  return world;
}

inline double true_reward(const WorldSpec& world, const FeatureVector& phi) {
  if (static_cast<int>(phi.size()) != world.d) {
    throw std::invalid_argument("true_reward: dimension mismatch");
  }
  double acc = world.b;
  for (int i = 0; i < world.d; ++i) {
    double z = 0.0;
    const double* row = world.u.data() + static_cast<std::size_t>(i) * world.d;
    for (int j = 0; j < world.d; ++j) z += row[j] * phi[j];
    acc += world.w[i] * std::tanh(z);
  }
  return acc;
}

struct PreferenceRecord {
  FeatureVector phi_chosen;
  FeatureVector phi_rejected;
  bool reversed = false;
};

// How chosen/rejected is assigned from the true margin: a Bernoulli draw
// from the preference law (default; plants irreducible label noise), or
// deterministically by the larger reward (for tests that need clean labels).
enum class LabelMode { kBernoulli, kArgmax };

inline FeatureVector sample_in_box(const WorldSpec& world, Rng& rng) {
  FeatureVector phi(world.d);
  for (int j = 0; j < world.d; ++j) {
    phi[j] = world.box_center[j] +
             world.box_halfwidth[j] * rng.uniform(-1.0, 1.0);
  }
  return phi;
}

inline std::vector<PreferenceRecord> sample_pairs(
    const WorldSpec& world, int n, Rng& rng,
    LabelMode mode = LabelMode::kBernoulli) {
  if (n < 1) throw std::invalid_argument("sample_pairs: n must be >= 1");
  std::vector<PreferenceRecord> records;
  records.reserve(n);
  for (int i = 0; i < n; ++i) {
    FeatureVector a = sample_in_box(world, rng);
    FeatureVector b = sample_in_box(world, rng);
    const double margin = true_reward(world, a) - true_reward(world, b);
    bool a_chosen;
    if (mode == LabelMode::kBernoulli) {
      a_chosen = rng.uniform() < sigmoid(margin);
    } else {
      a_chosen = margin >= 0.0;
    }
    PreferenceRecord rec;
    if (a_chosen) {
      rec.phi_chosen = std::move(a);
      rec.phi_rejected = std::move(b);
    } else {
      rec.phi_chosen = std::move(b);
      rec.phi_rejected = std::move(a);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// Swaps chosen/rejected on exactly round(rho * n) records, selected uniformly
// without replacement, and flags them.
inline void inject_reversal(std::vector<PreferenceRecord>& records, double rho,
                            Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("inject_reversal: rho must lie in [0,1]");
  }
  const std::size_t n = records.size();
  const std::size_t flips =
      static_cast<std::size_t>(std::llround(rho * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  // partial Fisher-Yates: the first `flips` entries are a uniform sample
  for (std::size_t i = 0; i < flips; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
    std::swap(idx[i], idx[j]);
  }
  for (std::size_t i = 0; i < flips; ++i) {
    PreferenceRecord& rec = records[idx[i]];
    std::swap(rec.phi_chosen, rec.phi_rejected);
    rec.reversed = !rec.reversed;
  }
}

// Feature-distribution shift for the epistemic study: the sampling box is
// translated by offset (in units of half-widths when uniform_offset is used
// by callers) and scaled about its center.
struct FeatureShift {
  std::vector<double> offset;  // absolute per-coordinate translation
  double scale = 1.0;

  static FeatureShift none(int d) { return FeatureShift{std::vector<double>(d, 0.0), 1.0}; }
  static FeatureShift uniform_offset(int d, double off, double scale = 1.0) {
    return FeatureShift{std::vector<double>(d, off), scale};
  }
};

// shift = (0, 1) reproduces the in-domain stream draw-for-draw.
inline std::vector<FeatureVector> sample_shifted_features(
    const WorldSpec& world, const FeatureShift& shift, int n, Rng& rng) {
  if (n < 1) {
    throw std::invalid_argument("sample_shifted_features: n must be >= 1");
  }
  if (static_cast<int>(shift.offset.size()) != world.d) {
    throw std::invalid_argument("sample_shifted_features: offset dimension");
  }
  std::vector<FeatureVector> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    FeatureVector phi(world.d);
    for (int j = 0; j < world.d; ++j) {
      phi[j] = world.box_center[j] + shift.offset[j] +
               shift.scale * world.box_halfwidth[j] * rng.uniform(-1.0, 1.0);
    }
    out.push_back(std::move(phi));
  }
  return out;
}

struct DatasetMeta {
  int format_version = 1;
  std::uint64_t world_seed = 0;
  int n = 0;
  double reversal_ratio = 0.0;
  std::string shift = "none";
};

inline constexpr int kDatasetVersion = 1;

// Line-delimited JSON: a meta header line, then one record per line.
// nlohmann::json orders keys lexicographically and prints shortest
// round-trip decimals, so identical data serializes byte-identically.
inline void save_dataset(const std::vector<PreferenceRecord>& records,
                         const DatasetMeta& meta, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  nlohmann::json header;
  header["meta"] = {{"format_version", meta.format_version},
                    {"world_seed", meta.world_seed},
                    {"n", meta.n},
                    {"reversal_ratio", meta.reversal_ratio},
                    {"shift", meta.shift}};
  out << header.dump() << '\n';
  for (const PreferenceRecord& rec : records) {
    nlohmann::json line;
    line["chosen"] = rec.phi_chosen;
    line["rejected"] = rec.phi_rejected;
    line["reversed"] = rec.reversed;
    out << line.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

inline std::pair<std::vector<PreferenceRecord>, DatasetMeta> load_dataset(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("dataset is empty (missing meta line): " + path);
  }
  DatasetMeta meta;
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    const nlohmann::json& m = j.at("meta");
    meta.format_version = m.at("format_version").get<int>();
    if (meta.format_version != kDatasetVersion) {
      throw DataError("dataset version " +
                      std::to_string(meta.format_version) +
                      " not supported (expected " +
                      std::to_string(kDatasetVersion) + ")");
    }
    meta.world_seed = m.at("world_seed").get<std::uint64_t>();
    meta.n = m.at("n").get<int>();
    meta.reversal_ratio = m.at("reversal_ratio").get<double>();
    meta.shift = m.at("shift").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dataset meta line invalid: ") + e.what());
  }
  std::vector<PreferenceRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      PreferenceRecord rec;
      rec.phi_chosen = j.at("chosen").get<FeatureVector>();
      rec.phi_rejected = j.at("rejected").get<FeatureVector>();
      rec.reversed = j.at("reversed").get<bool>();
      if (rec.phi_chosen.size() != rec.phi_rejected.size()) {
        throw DataError("dataset line " + std::to_string(line_no) +
                        ": chosen/rejected dimensions differ");
      }
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset line " + std::to_string(line_no) +
                      ": parse error: " + e.what());
    }
  }
  return {std::move(records), meta};
}

}  // namespace purm
