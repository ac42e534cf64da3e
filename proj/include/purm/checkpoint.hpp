#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "purm/errors.hpp"
#include "purm/reward_models.hpp"

namespace purm {

// Reward-model selector as it appears in configs. The bte_* variants share
// one trained ensemble and differ only in the aggregation rule applied at
// use time.
enum class RmKind { kPurm, kBtrm, kBteMean, kBteWco, kBteUwo };

inline bool is_ensemble_kind(RmKind k) {
  return k == RmKind::kBteMean || k == RmKind::kBteWco || k == RmKind::kBteUwo;
}

inline AggregateRule aggregate_rule_of(RmKind k) {
  switch (k) {
    case RmKind::kBteWco:
      return AggregateRule::kWco;
    case RmKind::kBteUwo:
      return AggregateRule::kUwo;
    default:
      return AggregateRule::kMean;
  }
}

inline std::string rm_kind_name(RmKind k) {
  switch (k) {
    case RmKind::kPurm:
      return "purm";
    case RmKind::kBtrm:
      return "btrm";
    case RmKind::kBteMean:
      return "bte_mean";
    case RmKind::kBteWco:
      return "bte_wco";
    case RmKind::kBteUwo:
      return "bte_uwo";
  }
  return "?";
}

inline RmKind parse_rm_kind(const std::string& s) {
  if (s == "purm") return RmKind::kPurm;
  if (s == "btrm") return RmKind::kBtrm;
  if (s == "bte" || s == "bte_mean") return RmKind::kBteMean;
  if (s == "bte_wco") return RmKind::kBteWco;
  if (s == "bte_uwo") return RmKind::kBteUwo;
  throw ConfigError("unknown model kind: '" + s + "'");
}

// Frozen model bundle. kind selects which member is meaningful: "purm" and
// "btrm" use model, "bte" uses ensemble.
struct Checkpoint {
  std::string kind;  // "purm" | "btrm" | "bte"
  std::uint64_t seed = 0;
  MlpParams model;
  EnsembleParams ensemble;
};

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json mlp_to_json(const MlpParams& p) {
  return nlohmann::json{
      {"d", p.d}, {"h", p.h}, {"out", p.out}, {"weights", p.flatten()}};
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
  MlpParams p = MlpParams::zeros(j.at("d").get<int>(), j.at("h").get<int>(),
                                 j.at("out").get<int>());
  const auto flat = j.at("weights").get<std::vector<double>>();
  p.assign_flat(flat);
  return p;
}

}  // namespace detail

inline std::string checkpoint_to_json(const Checkpoint& c) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = c.kind;
  j["seed"] = c.seed;
  j["log_sigma_clamp"] = {kLogSigmaMin, kLogSigmaMax};
  if (c.kind == "bte") {
    j["alpha"] = c.ensemble.alpha;
    nlohmann::json members = nlohmann::json::array();
    for (const MlpParams& m : c.ensemble.members) {
      members.push_back(detail::mlp_to_json(m));
    }
    j["members"] = members;
  } else {
    j["model"] = detail::mlp_to_json(c.model);
  }
  return j.dump();
}

inline Checkpoint checkpoint_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("checkpoint: unsupported format version " +
                      std::to_string(version));
    }
    Checkpoint c;
    c.kind = j.at("kind").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (c.kind == "bte") {
      c.ensemble.alpha = j.at("alpha").get<double>();
      for (const auto& m : j.at("members")) {
        c.ensemble.members.push_back(detail::mlp_from_json(m));
      }
      if (c.ensemble.members.size() < 2) {
        throw DataError("checkpoint: ensemble needs at least 2 members");
      }
    } else if (c.kind == "purm" || c.kind == "btrm") {
      c.model = detail::mlp_from_json(j.at("model"));
      const int want = (c.kind == "purm") ? 2 : 1;
      if (c.model.out != want) {
        throw DataError("checkpoint: head count does not match kind");
      }
    } else {
      throw DataError("checkpoint: unknown kind '" + c.kind + "'");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed record: ") + e.what());
  }
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << checkpoint_to_json(c) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

// FNV-1a over the raw parameter bytes; used to assert a model stayed frozen.
inline std::uint64_t checkpoint_hash(const Checkpoint& c) {
  std::uint64_t hash = 1469598103934665603ULL;
  const auto mix = [&hash](const std::vector<double>& v) {
    for (double x : v) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(x));
      std::memcpy(&bits, &x, sizeof(bits));
      for (int b = 0; b < 8; ++b) {
        hash ^= (bits >> (8 * b)) & 0xFF;
        hash *= 1099511628211ULL;
      }
    }
  };
  if (c.kind == "bte") {
    for (const MlpParams& m : c.ensemble.members) mix(m.flatten());
  } else {
    mix(c.model.flatten());
  }
  return hash;
}

}  // namespace purm
