#include <gtest/gtest.h>

#include <filesystem>

#include "dirgrpo/config.hpp"
#include "dirgrpo/experiment.hpp"

namespace {

using namespace dirgrpo;
namespace fs = std::filesystem;

constexpr const char* kTinyConfig = R"(# small run
seed=3
method=grpo
policy.family=direct
dataset.profile=expdecay
dataset.tau=6
dataset.range=20
dataset.bins=21
dataset.n_max=30
dataset.test_per_bin=2
reward.kind=ccc
reward.range=20
grpo.batch_size=8
grpo.epochs=1
grpo.optimizer=adamw
sft.epochs=1
sft.batch_size=8
)";

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dirgrpo_cfg_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    io::write_file(dir_ / "tiny.cfg", kTinyConfig);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST(KeyValues, ParsesCommentsAndWhitespace) {
  const auto kv = parse_key_values("# c\n\n a = 1 \nb=x=y\r\n");
  EXPECT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "x=y");
  EXPECT_THROW(parse_key_values("novalue\n"), ConfigError);
  EXPECT_THROW(parse_key_values("=3\n"), ConfigError);
}

TEST(Config, AppliesKeysAndPropagatesSeed) {
  ExperimentConfig cfg;
  apply_key_values(cfg, parse_key_values(kTinyConfig));
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.dataset.seed, 3u);
  EXPECT_EQ(cfg.grpo.seed, 3u);
  EXPECT_EQ(cfg.sft.seed, 3u);
  EXPECT_EQ(cfg.dataset.bins, 21);
  EXPECT_EQ(std::get<ExpDecay>(cfg.dataset.profile).tau, 6.0);
  EXPECT_EQ(cfg.grpo.optimizer, OptimizerKind::AdamW);
  EXPECT_EQ(cfg.reward.kind, RewardKind::CCC);

  ExperimentConfig explicit_seed;
  apply_key_values(explicit_seed, {{"seed", "3"}, {"grpo.seed", "9"}});
  EXPECT_EQ(explicit_seed.grpo.seed, 9u);
  EXPECT_EQ(explicit_seed.dataset.seed, 3u);
}

TEST(Config, RejectsBadInput) {
  ExperimentConfig cfg;
  EXPECT_THROW(apply_key_values(cfg, {{"grpo.kk", "4"}}), ConfigError);
  EXPECT_THROW(apply_key_values(cfg, {{"grpo.K", "four"}}), ConfigError);
  EXPECT_THROW(apply_key_values(cfg, {{"method", "ppo"}}), ConfigError);
  EXPECT_THROW(apply_key_values(cfg, {{"dataset.profile", "uniform"}}), ConfigError);
  EXPECT_THROW(apply_key_values(cfg, {{"sft.soft", "maybe"}}), ConfigError);
  // tau belongs to the exponential profile only
  EXPECT_THROW(apply_key_values(cfg, {{"dataset.profile", "agedb"}, {"dataset.tau", "5"}}), ConfigError);
}

TEST(Config, MultiPeakProfile) {
  ExperimentConfig cfg;
  apply_key_values(cfg, {{"dataset.profile", "multipeak"}, {"dataset.peaks", "20:5:1;70:8:0.5"}});
  const auto& mp = std::get<MultiPeak>(cfg.dataset.profile);
  ASSERT_EQ(mp.peaks.size(), 2u);
  EXPECT_EQ(mp.peaks[1].center, 70.0);
  EXPECT_EQ(mp.peaks[1].height, 0.5);
  EXPECT_THROW(apply_key_values(cfg, {{"dataset.profile", "multipeak"}, {"dataset.peaks", "20:5"}}), ConfigError);
}

TEST(Config, Validation) {
  ExperimentConfig cfg;
  apply_key_values(cfg, parse_key_values(kTinyConfig));
  EXPECT_NO_THROW(validate(cfg));
  auto bad = cfg;
  bad.dataset.range = 20.5;
  EXPECT_THROW(validate(bad), ConfigError);
  bad.family = PolicyFamily::DigitAutoregressive;
  EXPECT_NO_THROW(validate(bad));
  bad = cfg;
  bad.dataset.bins = 1;
  EXPECT_THROW(validate(bad), ConfigError);
  bad = cfg;
  bad.grpo.k = 1;
  EXPECT_THROW(validate(bad), ConfigError);
  bad.method = Method::Sft;  // grpo settings are not checked for sft runs
  EXPECT_NO_THROW(validate(bad));
}

TEST_F(TempDir, LoadConfigOverridesAndSeed) {
  const auto cfg = load_config(dir_ / "tiny.cfg", {{"grpo.K", "6"}}, 11);
  EXPECT_EQ(cfg.grpo.k, 6);
  EXPECT_EQ(cfg.seed, 11u);
  EXPECT_EQ(cfg.dataset.seed, 11u);
  EXPECT_EQ(cfg.sft.seed, 11u);

  io::write_file(dir_ / "noreward.cfg", "method=grpo\n");
  EXPECT_THROW(load_config(dir_ / "noreward.cfg"), ConfigError);
  EXPECT_NO_THROW(load_config(dir_ / "noreward.cfg", {{"reward.kind", "mae"}}));
  EXPECT_THROW(load_config(dir_ / "missing.cfg"), ConfigError);
}

TEST_F(TempDir, ResolvedEchoRoundTrips) {
  for (const char* method : {"grpo", "sft", "sft-soft"}) {
    const auto cfg = load_config(dir_ / "tiny.cfg", {{"method", method}});
    const auto echo = config_to_string(cfg);
    io::write_file(dir_ / "echo.cfg", echo);
    const auto again = load_config(dir_ / "echo.cfg");
    EXPECT_EQ(config_to_string(again), echo) << method;
    // defaulted fields are spelled out
    EXPECT_NE(echo.find("dataset.sigma=0.05\n"), std::string::npos);
    EXPECT_NE(echo.find("policy.init_std=0.01\n"), std::string::npos);
  }
  const auto sft = config_to_string(load_config(dir_ / "tiny.cfg", {{"method", "sft"}}));
  EXPECT_EQ(sft.find("reward.kind"), std::string::npos);
  EXPECT_NE(sft.find("sft.soft=false"), std::string::npos);
}

TEST(Config, ReferenceConfigLoads) {
  const auto cfg = load_config(DIRGRPO_REFERENCE_CONFIG);
  EXPECT_EQ(cfg.method, Method::Grpo);
  EXPECT_EQ(cfg.family, PolicyFamily::DirectCategorical);
  EXPECT_EQ(std::get<ExpDecay>(cfg.dataset.profile).tau, 25.0);
  EXPECT_EQ(cfg.dataset.range, 100.0);
  EXPECT_EQ(cfg.dataset.n_max, 353);
  EXPECT_EQ(cfg.dataset.test_per_bin, 5);
  EXPECT_EQ(cfg.dataset.sigma, 0.05);
  EXPECT_EQ(cfg.grpo.k, 4);
  EXPECT_EQ(cfg.grpo.batch_size, 16);
  EXPECT_EQ(cfg.grpo.beta_kl, 0.04);
  EXPECT_EQ(cfg.reward.format_c, 0.5);
}

TEST(Experiment, GitBlobHash) {
  // `git hash-object` of the empty file and of "hello\n"
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_F(TempDir, GenDataWritesFiles) {
  const auto cfg = load_config(dir_ / "tiny.cfg");
  const auto ds = cmd_gen_data(cfg, dir_ / "data");
  const auto files = data_files(dir_ / "data");
  EXPECT_EQ(samples_from_csv(files.train).size(), ds.train.size());
  EXPECT_EQ(samples_from_csv(files.test).size(), 21u * 2u);
  EXPECT_EQ(partition_from_csv(files.partition).bins(), 21);
  EXPECT_EQ(io::read_file(dir_ / "data" / "config.cfg"), config_to_string(cfg));
}

TEST_F(TempDir, TrainEvalCompareRoundTrip) {
  const auto grpo = load_config(dir_ / "tiny.cfg");
  const auto sft = load_config(dir_ / "tiny.cfg", {{"method", "sft-soft"}});
  cmd_train(grpo, dir_ / "grpo", 2);
  cmd_train(sft, dir_ / "sft");
  for (const char* f : {"policy.ckpt", "history.csv", "manifest.txt", "train.csv", "test.csv", "partition.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "grpo" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(dir_ / "grpo" / "checkpoints" / "step_2.ckpt"));
  EXPECT_TRUE(io::read_file(dir_ / "sft" / "history.csv").starts_with("step,ce_loss\n"));

  const auto manifest = io::read_file(dir_ / "grpo" / "manifest.txt");
  EXPECT_NE(manifest.find("inputs_hash="), std::string::npos);
  EXPECT_NE(manifest.find(config_to_string(grpo)), std::string::npos);
  EXPECT_NE(manifest.find("checkpoint_hash=" + git_blob_hash(io::read_file(dir_ / "grpo" / "policy.ckpt"))),
            std::string::npos);

  const auto files = data_files(dir_ / "grpo");
  const auto rep = cmd_eval(dir_ / "grpo" / "policy.ckpt", files.test, files.partition, grpo.eps_gm, dir_ / "eval_g");
  cmd_eval(dir_ / "sft" / "policy.ckpt", files.test, files.partition, grpo.eps_gm, dir_ / "eval_s");
  EXPECT_EQ(rep.all().n, 42);
  EXPECT_TRUE(io::read_file(dir_ / "eval_g" / "sorted_errors.csv").starts_with("rank,abs_error,region\n1,"));
  EXPECT_TRUE(io::read_file(dir_ / "eval_g" / "collapse.txt").starts_with("pred_std_ratio="));

  // retraining from the recorded config reproduces the report byte for byte
  const auto recorded = load_config(dir_ / "grpo" / "config.cfg");
  cmd_train(recorded, dir_ / "again");
  cmd_eval(dir_ / "again" / "policy.ckpt", files.test, files.partition, recorded.eps_gm, dir_ / "eval_again");
  EXPECT_EQ(io::read_file(dir_ / "eval_again" / "report.json"), io::read_file(dir_ / "eval_g" / "report.json"));

  const auto rows =
      cmd_compare(dir_ / "eval_g" / "report.json", dir_ / "eval_s" / "report.json", files.partition, dir_ / "cmp");
  EXPECT_EQ(rows.size(), 21u);
  EXPECT_TRUE(io::read_file(dir_ / "cmp" / "gain.csv").starts_with("bin,train_count,mae_a,mae_b,gain\n0,30,"));
  EXPECT_NE(io::read_file(dir_ / "cmp" / "summary.txt").find("collapse ratio"), std::string::npos);
  EXPECT_THROW(load_report(dir_ / "cmp" / "gain.csv"), IoError);
}

}  // namespace
