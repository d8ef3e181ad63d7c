// dirgrpo: dataset generation, training, evaluation and comparison.
//
// Exit codes: 0 success, 1 usage error, 2 config error, 3 numeric failure,
// 4 I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dirgrpo/dirgrpo.hpp"

namespace {

using namespace dirgrpo;

dirgrpo::KeyValues parse_sets(const std::vector<std::string>& sets) {
  dirgrpo::KeyValues kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution-aware GRPO workbench for imbalanced numeric regression"};
  app.set_version_flag("--version", DIRGRPO_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config (key=value)")->required();
    cmd->add_option("--seed", seed, "Override the top-level seed and every sub-seed");
    cmd->add_option("--set", sets, "Override a config key (key=value), repeatable");
    cmd->add_option("--out", out_dir, "Output directory (default: output_dir from the config)");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate train/test CSVs and the shot partition");
  add_config_flags(gen);

  long checkpoint_every = 0;
  auto* train = app.add_subcommand("train", "Train a policy (sft, sft-soft or grpo)");
  add_config_flags(train);
  train->add_option("--checkpoint-every", checkpoint_every, "Write a checkpoint every N steps (0: final only)");

  std::string checkpoint, test_csv, partition_csv, eval_config;
  double eps_gm = 1e-2;
  auto* eval = app.add_subcommand("eval", "Greedy-decode the test split and write the shot-aware report");
  eval->add_option("--checkpoint", checkpoint, "Policy checkpoint")->required();
  eval->add_option("--test", test_csv, "Test CSV")->required();
  eval->add_option("--partition", partition_csv, "Partition CSV")->required();
  eval->add_option("--config", eval_config, "Config providing eval.eps_gm");
  eval->add_option("--eps-gm", eps_gm, "GM floor epsilon (overrides the config)");
  eval->add_option("--out", out_dir, "Output directory")->required();

  std::string report_a, report_b;
  auto* compare = app.add_subcommand("compare", "Per-bin MAE gain table and summary for two reports");
  compare->add_option("--a", report_a, "Report JSON of method a")->required();
  compare->add_option("--b", report_b, "Report JSON of method b")->required();
  compare->add_option("--partition", partition_csv, "Partition CSV")->required();
  compare->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version also arrive here, with exit code 0
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    auto resolve = [&]() {
      auto cfg = load_config(config_path, parse_sets(sets), seed);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      return cfg;
    };
    if (gen->parsed()) {
      const auto cfg = resolve();
      const auto ds = cmd_gen_data(cfg, cfg.output_dir);
      std::cout << "wrote " << ds.train.size() << " train / " << ds.test.size() << " test samples to "
                << cfg.output_dir << '\n';
    } else if (train->parsed()) {
      const auto cfg = resolve();
      cmd_train(cfg, cfg.output_dir, checkpoint_every);
      std::cout << "trained " << method_name(cfg.method) << " -> " << (std::filesystem::path(cfg.output_dir) / "policy.ckpt").string()
                << '\n';
    } else if (eval->parsed()) {
      if (!eval_config.empty() && eval->count("--eps-gm") == 0) eps_gm = load_config(eval_config).eps_gm;
      const auto rep = cmd_eval(checkpoint, test_csv, partition_csv, eps_gm, out_dir);
      std::cout << "mae all=" << *rep.all().mae << " pred_std_ratio=" << rep.pred_std_ratio << '\n';
    } else if (compare->parsed()) {
      const auto rows = cmd_compare(report_a, report_b, partition_csv, out_dir);
      std::cout << io::read_file(std::filesystem::path(out_dir) / "summary.txt");
      std::cout << rows.size() << " bins compared\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
