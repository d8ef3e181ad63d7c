#ifndef DIRGRPO_KERNELS_HPP_
#define DIRGRPO_KERNELS_HPP_

// Flat-buffer entry points over the pure kernels, for foreign-function
// wrappers that hand over contiguous double arrays.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dirgrpo/dataset.hpp"
#include "dirgrpo/eval.hpp"
#include "dirgrpo/grpo.hpp"
#include "dirgrpo/rewards.hpp"

namespace dirgrpo::kernels {

/// Batch-level reward for one trajectory given peer means. means[focus_index]
/// is ignored; a NaN peer mean marks a peer with no valid trajectory.
inline RewardOutcome reward_from_means(std::span<const double> means, std::span<const double> targets,
                                       std::optional<double> focus_value, std::size_t focus_index,
                                       const RewardConfig& cfg) {
  if (means.size() != targets.size()) throw std::invalid_argument("reward_from_means: length mismatch");
  if (focus_index >= means.size()) throw std::out_of_range("reward_from_means: focus index out of range");
  if (cfg.kind != RewardKind::CCC && cfg.kind != RewardKind::Spearman && cfg.kind != RewardKind::PairRank) {
    throw std::invalid_argument("reward_from_means: reward kind is not batch-level");
  }
  std::vector<GenerationGroup> batch;
  batch.reserve(means.size());
  for (std::size_t j = 0; j < means.size(); ++j) {
    std::optional<double> v;
    if (j == focus_index) {
      v = focus_value;
    } else if (!std::isnan(means[j])) {
      v = means[j];
    }
    batch.emplace_back(static_cast<std::int64_t>(j), std::vector<std::optional<double>>{v});
  }
  const RewardModel model{cfg, {}};
  const std::vector<int> bins(means.size(), 0);
  return model(batch, targets, bins, focus_index, 0);
}

inline double batch_ccc_reward(std::span<const double> means, std::span<const double> targets,
                               std::optional<double> focus_value, std::size_t focus_index, RewardConfig cfg) {
  cfg.kind = RewardKind::CCC;
  return reward_from_means(means, targets, focus_value, focus_index, cfg).value;
}

inline double spearman_reward(std::span<const double> means, std::span<const double> targets,
                              std::optional<double> focus_value, std::size_t focus_index, RewardConfig cfg) {
  cfg.kind = RewardKind::Spearman;
  return reward_from_means(means, targets, focus_value, focus_index, cfg).value;
}

inline double pair_rank_reward(std::span<const double> means, std::span<const double> targets,
                               std::optional<double> focus_value, std::size_t focus_index, RewardConfig cfg) {
  cfg.kind = RewardKind::PairRank;
  return reward_from_means(means, targets, focus_value, focus_index, cfg).value;
}

inline std::vector<double> normalize_advantages(std::span<const double> rewards, AdvantageVariant variant,
                                                double eps_adv = 1e-4) {
  return compute_advantages(rewards, variant, eps_adv).advantages;
}

/// Metrics in report order: all, many, medium, few.
struct DirMetrics {
  std::array<RegionMetrics, 4> regions;
};

inline DirMetrics dir_metrics(std::span<const double> abs_errors, std::span<const Region> regions, double eps_gm) {
  if (abs_errors.size() != regions.size()) throw std::invalid_argument("dir_metrics: length mismatch");
  if (!(eps_gm > 0.0)) throw std::invalid_argument("dir_metrics: eps_gm must be > 0");
  std::array<std::vector<double>, 4> split;
  for (std::size_t i = 0; i < abs_errors.size(); ++i) {
    if (!(abs_errors[i] >= 0.0)) throw std::invalid_argument("dir_metrics: errors must be non-negative");
    split[0].push_back(abs_errors[i]);
    split[region_slot(regions[i])].push_back(abs_errors[i]);
  }
  DirMetrics out;
  for (std::size_t s = 0; s < 4; ++s) out.regions[s] = detail::summarize(split[s], eps_gm);
  return out;
}

}  // namespace dirgrpo::kernels

#endif  // DIRGRPO_KERNELS_HPP_
