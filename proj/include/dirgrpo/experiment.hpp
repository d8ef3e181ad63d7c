#ifndef DIRGRPO_EXPERIMENT_HPP_
#define DIRGRPO_EXPERIMENT_HPP_

// End-to-end commands behind the CLI: dataset generation, training,
// evaluation and comparison. Every command writes plain files into an
// output directory; nothing depends on wall-clock time.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dirgrpo/config.hpp"
#include "dirgrpo/dataset.hpp"
#include "dirgrpo/eval.hpp"
#include "dirgrpo/grpo.hpp"
#include "dirgrpo/io.hpp"
#include "dirgrpo/policy.hpp"
#include "dirgrpo/sft.hpp"

namespace dirgrpo {

namespace fs = std::filesystem;

/// Git blob id: SHA-1 over "blob <size>\0" followed by the content.
inline std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw IoError("sha1 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline Policy make_initial_policy(const ExperimentConfig& cfg) {
  Policy p(cfg.family, cfg.dataset.feature_dim(), cfg.dataset.range, cfg.max_len);
  const auto seed = cfg.method == Method::Grpo ? cfg.grpo.seed : cfg.sft.seed;
  p.init_normal(seed, cfg.init_std);
  return p;
}

struct DataFiles {
  fs::path train, test, partition;
};

inline DataFiles data_files(const fs::path& dir) {
  return {dir / "train.csv", dir / "test.csv", dir / "partition.csv"};
}

/// Writes train.csv, test.csv, partition.csv and the resolved config.
inline Dataset cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out) {
  const auto ds = generate_dataset(cfg.dataset);
  const auto partition = compute_shot_partition(ds.train, cfg.dataset.bins);
  const auto files = data_files(out);
  io::write_file(files.train, samples_to_csv(ds.train));
  io::write_file(files.test, samples_to_csv(ds.test));
  io::write_file(files.partition, partition_to_csv(partition));
  io::write_file(out / "config.cfg", config_to_string(cfg));
  return ds;
}

struct TrainOutcome {
  Policy params;
  std::string history_csv;
};

/// Trains the configured method on freshly generated data. Writes the data
/// files, policy.ckpt, history.csv, config.cfg and manifest.txt. With
/// `checkpoint_every` > 0 intermediate checkpoints go to checkpoints/.
inline TrainOutcome cmd_train(const ExperimentConfig& cfg, const fs::path& out, long checkpoint_every = 0) {
  validate(cfg);
  const auto ds = cmd_gen_data(cfg, out);
  const auto partition = compute_shot_partition(ds.train, cfg.dataset.bins);
  const auto initial = make_initial_policy(cfg);
  auto maybe_checkpoint = [&](const Policy& p, long step) {
    if (checkpoint_every > 0 && (step + 1) % checkpoint_every == 0) {
      save_checkpoint(p, out / "checkpoints" / ("step_" + std::to_string(step + 1) + ".ckpt"));
    }
  };

  TrainOutcome result{initial, {}};
  if (cfg.method == Method::Grpo) {
    RewardModel reward{cfg.reward, partition.bin_counts};
    auto trained = train_grpo(initial, ds.train, cfg.grpo, reward,
                              [&](const Policy& p, const StepStats& s) { maybe_checkpoint(p, s.step); });
    result.params = std::move(trained.params);
    result.history_csv = grpo_history_to_csv(trained.history);
  } else {
    auto sft_cfg = cfg.sft;
    sft_cfg.soft = cfg.method == Method::SftSoft;
    auto trained = train_sft(initial, ds.train, sft_cfg,
                             [&](const Policy& p, const SftStats& s) { maybe_checkpoint(p, s.step); });
    result.params = std::move(trained.params);
    result.history_csv = sft_history_to_csv(trained.history);
  }

  const auto resolved = config_to_string(cfg);
  save_checkpoint(result.params, out / "policy.ckpt");
  io::write_file(out / "history.csv", result.history_csv);

  const auto train_csv = io::read_file(data_files(out).train);
  std::ostringstream manifest;
  manifest << "# run manifest\n";
  manifest << "config_hash=" << git_blob_hash(resolved) << '\n';
  manifest << "train_data_hash=" << git_blob_hash(train_csv) << '\n';
  manifest << "inputs_hash=" << git_blob_hash(resolved + train_csv) << '\n';
  manifest << "checkpoint_hash=" << git_blob_hash(checkpoint_to_string(result.params)) << '\n';
  manifest << "# resolved config\n" << resolved;
  io::write_file(out / "manifest.txt", manifest.str());
  return result;
}

/// Greedy predictions for every test sample.
inline std::vector<Prediction> predict(const Policy& p, const std::vector<Sample>& test) {
  std::vector<Prediction> preds;
  preds.reserve(test.size());
  for (const auto& s : test) preds.push_back({s.id, greedy_decode(p, s.features).parsed.value});
  return preds;
}

inline std::string predictions_to_csv(const std::vector<Prediction>& preds) {
  std::string out = "id,value\n";
  for (const auto& p : preds) out += std::to_string(p.sample_id) + ',' + (p.value ? io::format_double(*p.value) : "") + '\n';
  return out;
}

/// Writes report.json, sorted_errors.csv, predictions.csv and collapse.txt.
inline EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& test_csv, const fs::path& partition_csv,
                           double eps_gm, const fs::path& out) {
  const auto policy = load_checkpoint(checkpoint);
  const auto test = samples_from_csv(test_csv);
  const auto partition = partition_from_csv(partition_csv);
  const auto preds = predict(policy, test);
  const auto report = evaluate(preds, test, partition, eps_gm, policy.value_range());
  io::write_file(out / "report.json", to_json(report).dump(2) + '\n');
  io::write_file(out / "sorted_errors.csv", sorted_error_curve_to_csv(sorted_error_curve(report)));
  io::write_file(out / "predictions.csv", predictions_to_csv(preds));
  io::write_file(out / "collapse.txt", "pred_std_ratio=" + io::format_double(report.pred_std_ratio) + '\n');
  return report;
}

inline EvalReport load_report(const fs::path& path) {
  try {
    return report_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

/// Mean of per-bin gains over the bins of one region; nullopt if none.
inline std::optional<double> mean_region_gain(const std::vector<GainRow>& rows, const ShotPartition& partition,
                                              Region region) {
  double sum = 0.0;
  long n = 0;
  for (const auto& r : rows) {
    const Region rr = r.bin < partition.bins() ? partition.region_of(r.bin) : Region::Few;
    if (rr != region) continue;
    sum += r.gain;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

inline std::string comparison_summary(const EvalReport& a, const EvalReport& b, const std::vector<GainRow>& rows,
                                      const ShotPartition& partition) {
  std::ostringstream o;
  auto fmt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("n/a"); };
  auto delta = [](const std::optional<double>& x, const std::optional<double>& y) -> std::optional<double> {
    if (!x || !y) return std::nullopt;
    return *y - *x;
  };
  o << "comparison: a vs b (delta = b - a; positive favours a)\n\n";
  o << "region   n     mae_a      mae_b      delta_mae  gm_a       gm_b       delta_gm\n";
  for (std::size_t s = 0; s < 4; ++s) {
    const auto& ra = a.regions[s];
    const auto& rb = b.regions[s];
    char line[256];
    std::snprintf(line, sizeof(line), "%-8s %-5ld %-10s %-10s %-10s %-10s %-10s %-10s\n", kReportRegions[s], ra.n,
                  fmt(ra.mae).c_str(), fmt(rb.mae).c_str(), fmt(delta(ra.mae, rb.mae)).c_str(), fmt(ra.gm).c_str(),
                  fmt(rb.gm).c_str(), fmt(delta(ra.gm, rb.gm)).c_str());
    o << line;
  }
  o << "\ncollapse ratio (std pred / std target): a=" << io::format_double(a.pred_std_ratio)
    << " b=" << io::format_double(b.pred_std_ratio) << '\n';
  o << "invalid fraction: a=" << io::format_double(a.invalid_frac) << " b=" << io::format_double(b.invalid_frac)
    << '\n';
  o << "mean per-bin gain: many=" << fmt(mean_region_gain(rows, partition, Region::Many))
    << " medium=" << fmt(mean_region_gain(rows, partition, Region::Medium))
    << " few=" << fmt(mean_region_gain(rows, partition, Region::Few)) << '\n';
  return o.str();
}

/// Writes gain.csv and summary.txt.
inline std::vector<GainRow> cmd_compare(const fs::path& report_a, const fs::path& report_b,
                                        const fs::path& partition_csv, const fs::path& out) {
  const auto a = load_report(report_a);
  const auto b = load_report(report_b);
  const auto partition = partition_from_csv(partition_csv);
  const auto rows = gain_table(a, b, partition);
  io::write_file(out / "gain.csv", gain_table_to_csv(rows));
  io::write_file(out / "summary.txt", comparison_summary(a, b, rows, partition));
  return rows;
}

}  // namespace dirgrpo

#endif  // DIRGRPO_EXPERIMENT_HPP_
