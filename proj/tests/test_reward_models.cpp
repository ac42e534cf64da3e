#include "purm/reward_models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "purm/checkpoint.hpp"

namespace {

using purm::EnsembleParams;
using purm::FeatureVector;
using purm::GaussianReward;
using purm::MlpParams;

TEST(PurmForward, ZeroNetworkGivesStandardPrior) {
  const MlpParams p = MlpParams::zeros(4, 8, 2);
  const GaussianReward r = purm::purm_forward(p, {0.1, 0.2, 0.3, 0.4});
  EXPECT_DOUBLE_EQ(r.mu, 0.0);
  EXPECT_DOUBLE_EQ(r.log_sigma, 0.0);
  EXPECT_DOUBLE_EQ(r.sigma(), 1.0);
}

TEST(PurmForward, LogSigmaClampsAtBounds) {
  MlpParams p = MlpParams::zeros(2, 3, 2);
  p.b2[1] = 10.0;
  EXPECT_DOUBLE_EQ(purm::purm_forward(p, {0.0, 0.0}).log_sigma, 4.0);
  p.b2[1] = -50.0;
  EXPECT_DOUBLE_EQ(purm::purm_forward(p, {0.0, 0.0}).log_sigma, -6.0);
  // sigma bounded accordingly
  EXPECT_NEAR(purm::purm_forward(p, {0.0, 0.0}).sigma(), std::exp(-6.0), 1e-18);
}

TEST(PurmForward, RejectsWrongHeadCount) {
  const MlpParams p = MlpParams::zeros(2, 3, 1);
  EXPECT_THROW(purm::purm_forward(p, {0.0, 0.0}), std::invalid_argument);
}

TEST(BtrmForward, ZeroNetworkAndLinearity) {
  const MlpParams z = MlpParams::zeros(3, 2, 1);
  EXPECT_DOUBLE_EQ(purm::btrm_forward(z, {1.0, 2.0, 3.0}), 0.0);

  // near-linear regime: tanh(eps) ~ eps, so scaling the input scales the
  // output proportionally for zero biases
  MlpParams p = MlpParams::zeros(1, 1, 1);
  p.w1[0] = 1e-6;
  p.w2[0] = 1.0;
  const double y1 = purm::btrm_forward(p, {1.0});
  const double y2 = purm::btrm_forward(p, {2.0});
  EXPECT_NEAR(y2 / y1, 2.0, 1e-9);
}

TEST(BtrmForward, RejectsTwoHeadModel) {
  const MlpParams p = MlpParams::zeros(2, 3, 2);
  EXPECT_THROW(purm::btrm_forward(p, {0.0, 0.0}), std::invalid_argument);
}

TEST(Ensemble, ForwardIsMemberwise) {
  const EnsembleParams e = purm::init_ensemble_params(3, 4, 5, 0.5, 99);
  const FeatureVector phi{0.2, -0.7, 1.0};
  const auto rewards = purm::ensemble_forward(e, phi);
  ASSERT_EQ(rewards.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(rewards[i], purm::btrm_forward(e.members[i], phi));
  }
}

TEST(Aggregate, MatchesSpecifiedRules) {
  EXPECT_DOUBLE_EQ(
      purm::aggregate({1, 1, 1, 1, 1}, purm::AggregateRule::kUwo, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(
      purm::aggregate({0.2, 0.5, -0.1}, purm::AggregateRule::kWco, 0.5), -0.1);
  // mean 1, population variance 1: 1 - 0.5*1
  EXPECT_DOUBLE_EQ(purm::aggregate({0, 2}, purm::AggregateRule::kUwo, 0.5),
                   0.5);
  EXPECT_DOUBLE_EQ(
      purm::aggregate({0.5, 1.5, 2.5}, purm::AggregateRule::kMean, 0.5), 1.5);
}

TEST(Aggregate, MeanEqualsUwoAtZeroAlpha) {
  purm::Rng rng(41);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> r(5);
    for (double& v : r) v = rng.uniform(-3.0, 3.0);
    EXPECT_DOUBLE_EQ(purm::aggregate(r, purm::AggregateRule::kMean, 0.7),
                     purm::aggregate(r, purm::AggregateRule::kUwo, 0.0));
  }
}

TEST(Aggregate, RejectsEmptyList) {
  EXPECT_THROW(purm::aggregate({}, purm::AggregateRule::kMean, 0.5),
               std::invalid_argument);
  EXPECT_THROW(purm::ensemble_uncertainty({}), std::invalid_argument);
}

TEST(EnsembleUncertainty, PopulationStd) {
  EXPECT_DOUBLE_EQ(purm::ensemble_uncertainty({1, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(purm::ensemble_uncertainty({0, 2}), 1.0);
  // two-pass oracle on a random vector
  purm::Rng rng(1);
  std::vector<double> r(5);
  for (double& v : r) v = rng.uniform(-4.0, 4.0);
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= 5.0;
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean);
  var /= 5.0;
  EXPECT_NEAR(purm::ensemble_uncertainty(r), std::sqrt(var), 1e-12);
}

TEST(InitParams, DeterministicAndDistinctMembers) {
  const MlpParams a = purm::init_purm_params(6, 16, 7);
  const MlpParams b = purm::init_purm_params(6, 16, 7);
  EXPECT_EQ(a.flatten(), b.flatten());

  const EnsembleParams e = purm::init_ensemble_params(6, 16, 5, 0.5, 7);
  ASSERT_EQ(e.members.size(), 5u);
  for (int i = 1; i < 5; ++i) {
    EXPECT_NE(e.members[0].flatten(), e.members[i].flatten());
  }
  EXPECT_THROW(purm::init_ensemble_params(6, 16, 1, 0.5, 7),
               std::invalid_argument);
}

TEST(RmKind, NamesRoundTrip) {
  using purm::RmKind;
  for (RmKind k : {RmKind::kPurm, RmKind::kBtrm, RmKind::kBteMean,
                   RmKind::kBteWco, RmKind::kBteUwo}) {
    EXPECT_EQ(purm::parse_rm_kind(purm::rm_kind_name(k)), k);
  }
  EXPECT_EQ(purm::parse_rm_kind("bte"), RmKind::kBteMean);
  EXPECT_THROW(purm::parse_rm_kind("transformer"), purm::ConfigError);
  EXPECT_TRUE(purm::is_ensemble_kind(RmKind::kBteWco));
  EXPECT_FALSE(purm::is_ensemble_kind(RmKind::kPurm));
}

class CheckpointFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / "purm_ckpt_test";
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointFile, RoundTripIsBitExact) {
  purm::Checkpoint c;
  c.kind = "purm";
  c.seed = 12345;
  c.model = purm::init_purm_params(6, 32, 42);
  // make values irrational-ish so decimal shortcuts would show up
  c.model.b1[0] = 0.1 + 0.2;
  c.model.w1[3] = -1.0 / 3.0;

  const auto path = (dir_ / "m.json").string();
  purm::save_checkpoint(c, path);
  const purm::Checkpoint r = purm::load_checkpoint(path);
  EXPECT_EQ(r.kind, "purm");
  EXPECT_EQ(r.seed, 12345u);
  EXPECT_EQ(r.model.flatten(), c.model.flatten());
  EXPECT_EQ(purm::checkpoint_hash(r), purm::checkpoint_hash(c));
}

TEST_F(CheckpointFile, EnsembleRoundTrip) {
  purm::Checkpoint c;
  c.kind = "bte";
  c.seed = 5;
  c.ensemble = purm::init_ensemble_params(4, 8, 3, 0.5, 77);
  const auto path = (dir_ / "e.json").string();
  purm::save_checkpoint(c, path);
  const purm::Checkpoint r = purm::load_checkpoint(path);
  ASSERT_EQ(r.ensemble.members.size(), 3u);
  EXPECT_DOUBLE_EQ(r.ensemble.alpha, 0.5);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(r.ensemble.members[i].flatten(), c.ensemble.members[i].flatten());
  }
}

TEST_F(CheckpointFile, CorruptAndMismatchedInputsFail) {
  const auto path = (dir_ / "bad.json").string();
  {
    std::ofstream f(path);
    f << "{ not json";
  }
  EXPECT_THROW(purm::load_checkpoint(path), purm::DataError);
  {
    std::ofstream f(path);
    f << R"({"format_version": 99, "kind": "purm", "seed": 0})";
  }
  EXPECT_THROW(purm::load_checkpoint(path), purm::DataError);
  {
    // btrm kind with a two-head model
    purm::Checkpoint c;
    c.kind = "purm";
    c.model = purm::init_purm_params(3, 4, 1);
    auto text = purm::checkpoint_to_json(c);
    const auto swapped = text.replace(text.find("purm"), 4, "btrm");
    std::ofstream f(path);
    f << swapped;
  }
  EXPECT_THROW(purm::load_checkpoint(path), purm::DataError);
  EXPECT_THROW(purm::load_checkpoint((dir_ / "missing.json").string()),
               purm::DataError);
}

TEST_F(CheckpointFile, HashDetectsMutation) {
  purm::Checkpoint c;
  c.kind = "btrm";
  c.model = purm::init_btrm_params(5, 8, 3);
  const std::uint64_t before = purm::checkpoint_hash(c);
  c.model.w2[0] += 1e-12;
  EXPECT_NE(purm::checkpoint_hash(c), before);
}

}  // namespace
