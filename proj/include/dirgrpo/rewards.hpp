#ifndef DIRGRPO_REWARDS_HPP_
#define DIRGRPO_REWARDS_HPP_

// Reward kernels for numeric GRPO.
//
// Batch-level rewards score one sampled value q_k(x_i) jointly with the rest
// of the minibatch: the comparison vector holds q_k(x_i) at position i and
// the peers' mean predictions mu(x_j) everywhere else, aligned with the
// targets in minibatch order. CCC over that pair is the main reward;
// Spearman and pairwise rank agreement are the ranking-based alternatives.
// Point-wise MAE rewards (plain and bin-reweighted) are the baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dirgrpo/errors.hpp"

namespace dirgrpo {

/// K parsed predictions for one input; absent entries are invalid outputs.
struct GenerationGroup {
  std::int64_t sample_id = 0;
  std::vector<std::optional<double>> values;
  double mean = 0.0;  // over present values; meaningful iff valid_count >= 1
  int valid_count = 0;

  GenerationGroup() = default;
  GenerationGroup(std::int64_t id, std::vector<std::optional<double>> vals)
      : sample_id(id), values(std::move(vals)) {
    if (values.empty()) throw std::invalid_argument("GenerationGroup: K must be >= 1");
    double sum = 0.0;
    for (const auto& v : values) {
      if (v) {
        sum += *v;
        ++valid_count;
      }
    }
    if (valid_count > 0) mean = sum / valid_count;
  }

  std::size_t size() const { return values.size(); }
};

struct ComparisonPair {
  std::vector<double> q;
  std::vector<double> y;
  std::size_t focus = 0;
};

namespace detail {

inline void check_focus(std::span<const GenerationGroup> batch, std::span<const double> targets, std::size_t i,
                        std::size_t k) {
  if (batch.size() != targets.size()) throw std::invalid_argument("reward: batch/targets size mismatch");
  if (i >= batch.size()) throw std::out_of_range("reward: sample index out of range");
  if (k >= batch[i].size()) throw std::out_of_range("reward: trajectory index out of range");
}

// Pair construction shared by the strict and slot-dropping builders.
inline ComparisonPair assemble_pair(std::span<const GenerationGroup> batch, std::span<const double> targets,
                                    std::size_t i, std::size_t k, bool drop_invalid_peers) {
  ComparisonPair pair;
  pair.q.reserve(batch.size());
  pair.y.reserve(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (j == i) {
      pair.focus = pair.q.size();
      pair.q.push_back(*batch[i].values[k]);
      pair.y.push_back(targets[j]);
      continue;
    }
    if (batch[j].valid_count == 0) {
      if (drop_invalid_peers) continue;
      throw PeerAllInvalid(j);
    }
    pair.q.push_back(batch[j].mean);
    pair.y.push_back(targets[j]);
  }
  return pair;
}

}  // namespace detail

/// Comparison vectors for trajectory k of sample i. Requires every peer to
/// have at least one valid trajectory (throws PeerAllInvalid otherwise).
inline ComparisonPair build_comparison_pair(std::span<const GenerationGroup> batch, std::span<const double> targets,
                                            std::size_t i, std::size_t k) {
  detail::check_focus(batch, targets, i, k);
  if (batch.size() < 2) throw std::invalid_argument("comparison pair: batch needs at least 2 samples");
  if (!batch[i].values[k]) throw std::invalid_argument("comparison pair: focus trajectory is invalid");
  return detail::assemble_pair(batch, targets, i, k, false);
}

/// As build_comparison_pair, but peers without any valid trajectory are
/// dropped from both vectors.
inline ComparisonPair build_comparison_pair_dropping(std::span<const GenerationGroup> batch,
                                                     std::span<const double> targets, std::size_t i, std::size_t k) {
  detail::check_focus(batch, targets, i, k);
  if (!batch[i].values[k]) throw std::invalid_argument("comparison pair: focus trajectory is invalid");
  return detail::assemble_pair(batch, targets, i, k, true);
}

// ---------------------------------------------------------------------------
// Statistics

namespace detail {

inline void check_pair(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(who) + ": length mismatch");
  if (a.size() < 2) throw std::invalid_argument(std::string(who) + ": need at least 2 entries");
}

// Exact for constant vectors, so their centered entries are exactly zero.
inline double mean(std::span<const double> v) {
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) return v.front();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct Moments {
  double mean_a, mean_b, var_a, var_b, cov;
};

// Population (divide-by-n) moments.
inline Moments moments(std::span<const double> a, std::span<const double> b) {
  Moments m{mean(a), mean(b), 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - m.mean_a;
    const double db = b[i] - m.mean_b;
    m.var_a += da * da;
    m.var_b += db * db;
    m.cov += da * db;
  }
  const auto n = static_cast<double>(a.size());
  m.var_a /= n;
  m.var_b /= n;
  m.cov /= n;
  return m;
}

}  // namespace detail

/// Concordance correlation coefficient with population moments.
/// A denominator below eps means both vectors are constant and share a
/// mean; the result is then 1 for an exact match and 0 otherwise.
inline double ccc(std::span<const double> q, std::span<const double> y, double eps = 1e-12) {
  detail::check_pair(q, y, "ccc");
  const auto m = detail::moments(q, y);
  const double gap = m.mean_a - m.mean_b;
  const double denom = m.var_a + m.var_b + gap * gap;
  if (denom < eps) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (!(std::abs(q[i] - y[i]) < eps)) return 0.0;
    }
    return 1.0;
  }
  return std::clamp(2.0 * m.cov / denom, -1.0, 1.0);
}

/// Pearson correlation; nullopt when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  detail::check_pair(a, b, "pearson");
  const auto m = detail::moments(a, b);
  if (m.var_a <= 0.0 || m.var_b <= 0.0) return std::nullopt;
  return std::clamp(m.cov / std::sqrt(m.var_a * m.var_b), -1.0, 1.0);
}

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo + 1;
    while (hi < order.size() && v[order[hi]] == v[order[lo]]) ++hi;
    const double avg = 0.5 * static_cast<double>(lo + 1 + hi);  // mean of ranks lo+1..hi
    for (std::size_t t = lo; t < hi; ++t) ranks[order[t]] = avg;
    lo = hi;
  }
  return ranks;
}

/// Spearman correlation over fractional ranks; 0 when a side is constant.
inline double spearman(std::span<const double> a, std::span<const double> b) {
  detail::check_pair(a, b, "spearman");
  const auto ra = fractional_ranks(a);
  const auto rb = fractional_ranks(b);
  return pearson(ra, rb).value_or(0.0);
}

// ---------------------------------------------------------------------------
// Reward configuration

enum class RewardKind { CCC, Spearman, PairRank, MAE, DiscoMAE };

inline const char* reward_kind_name(RewardKind k) {
  switch (k) {
    case RewardKind::CCC: return "ccc";
    case RewardKind::Spearman: return "spearman";
    case RewardKind::PairRank: return "pair_rank";
    case RewardKind::MAE: return "mae";
    case RewardKind::DiscoMAE: return "disco_mae";
  }
  return "?";
}

inline RewardKind parse_reward_kind(std::string_view s) {
  for (auto k : {RewardKind::CCC, RewardKind::Spearman, RewardKind::PairRank, RewardKind::MAE,
                 RewardKind::DiscoMAE}) {
    if (s == reward_kind_name(k)) return k;
  }
  throw ConfigError("unknown reward kind '" + std::string(s) + "'");
}

struct RewardConfig {
  RewardKind kind = RewardKind::CCC;
  double format_c = 0.5;
  double range = 100.0;
  double disco_alpha = 0.5;
  double disco_cap = 10.0;
  double eps_denominator = 1e-12;
  /// Apply the DISCO bin weight to the format bonus as well.
  bool disco_weight_format = false;
};

inline void validate(const RewardConfig& cfg) {
  if (!(cfg.format_c > 0.0)) throw ConfigError("reward.format_c must be > 0");
  if (!(cfg.range > 0.0)) throw ConfigError("reward.range must be > 0");
  if (!(cfg.disco_cap >= 1.0)) throw ConfigError("reward.disco_cap must be >= 1");
  if (!(cfg.disco_alpha >= 0.0)) throw ConfigError("reward.disco_alpha must be >= 0");
  if (!(cfg.eps_denominator > 0.0)) throw ConfigError("reward.eps_denominator must be > 0");
}

// ---------------------------------------------------------------------------
// Point-wise rewards

/// 1 - |value - target| / R clamped to [0, 1], without the format bonus.
inline double mae_reward_core(double value, double target, double range) {
  return std::clamp(1.0 - std::abs(value - target) / range, 0.0, 1.0);
}

inline double mae_reward(std::optional<double> value, double target, const RewardConfig& cfg) {
  if (!value) return 0.0;
  return mae_reward_core(*value, target, cfg.range) + cfg.format_c;
}

/// Bin weight min((n_max / max(n_b, 1))^alpha, cap).
inline double disco_weight(int bin_count, int max_count, double alpha, double cap) {
  const double ratio = static_cast<double>(max_count) / static_cast<double>(std::max(bin_count, 1));
  return std::min(std::pow(ratio, alpha), cap);
}

inline double disco_mae_reward(std::optional<double> value, double target, int target_bin,
                               std::span<const int> bin_counts, const RewardConfig& cfg) {
  if (!value) return 0.0;
  if (target_bin < 0 || static_cast<std::size_t>(target_bin) >= bin_counts.size()) {
    throw std::out_of_range("disco_mae_reward: target bin not in bin counts");
  }
  const int n_max = *std::max_element(bin_counts.begin(), bin_counts.end());
  const double w = disco_weight(bin_counts[static_cast<std::size_t>(target_bin)], n_max, cfg.disco_alpha,
                                cfg.disco_cap);
  const double core = mae_reward_core(*value, target, cfg.range);
  return cfg.disco_weight_format ? w * (core + cfg.format_c) : w * core + cfg.format_c;
}

// ---------------------------------------------------------------------------
// Batch-level rewards

/// Reward value plus whether the batch-level term had to fall back to MAE
/// because too few peers had valid trajectories.
struct RewardOutcome {
  double value = 0.0;
  bool degraded = false;
};

namespace detail {

// Fraction of comparisons against the focus entry whose prediction order
// agrees with the target order (ties on both sides agree).
inline double pair_rank_agreement(const ComparisonPair& p) {
  auto sign = [](double d) { return (d > 0.0) - (d < 0.0); };
  const double qf = p.q[p.focus];
  const double yf = p.y[p.focus];
  int agree = 0;
  for (std::size_t j = 0; j < p.q.size(); ++j) {
    if (j == p.focus) continue;
    if (sign(qf - p.q[j]) == sign(yf - p.y[j])) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(p.q.size() - 1);
}

template <typename Statistic>
RewardOutcome batch_reward(std::span<const GenerationGroup> batch, std::span<const double> targets, std::size_t i,
                           std::size_t k, const RewardConfig& cfg, Statistic&& stat) {
  check_focus(batch, targets, i, k);
  if (batch.size() < 2) throw std::invalid_argument("batch reward: batch needs at least 2 samples");
  const auto& value = batch[i].values[k];
  if (!value) return {0.0, false};
  const auto pair = build_comparison_pair_dropping(batch, targets, i, k);
  if (pair.q.size() < 2) return {mae_reward(value, targets[i], cfg), true};
  return {stat(pair) + cfg.format_c, false};
}

}  // namespace detail

inline RewardOutcome ccc_reward_outcome(std::span<const GenerationGroup> batch, std::span<const double> targets,
                                        std::size_t i, std::size_t k, const RewardConfig& cfg) {
  return detail::batch_reward(batch, targets, i, k, cfg,
                              [&](const ComparisonPair& p) { return ccc(p.q, p.y, cfg.eps_denominator); });
}

inline RewardOutcome spearman_reward_outcome(std::span<const GenerationGroup> batch, std::span<const double> targets,
                                             std::size_t i, std::size_t k, const RewardConfig& cfg) {
  return detail::batch_reward(batch, targets, i, k, cfg,
                              [](const ComparisonPair& p) { return spearman(p.q, p.y); });
}

inline RewardOutcome pair_rank_reward_outcome(std::span<const GenerationGroup> batch,
                                              std::span<const double> targets, std::size_t i, std::size_t k,
                                              const RewardConfig& cfg) {
  return detail::batch_reward(batch, targets, i, k, cfg, detail::pair_rank_agreement);
}

/// CCC over the comparison pair plus the format bonus; 0 for an invalid
/// trajectory.
inline double ccc_reward(std::span<const GenerationGroup> batch, std::span<const double> targets, std::size_t i,
                         std::size_t k, const RewardConfig& cfg) {
  return ccc_reward_outcome(batch, targets, i, k, cfg).value;
}

inline double spearman_reward(std::span<const GenerationGroup> batch, std::span<const double> targets,
                              std::size_t i, std::size_t k, const RewardConfig& cfg) {
  return spearman_reward_outcome(batch, targets, i, k, cfg).value;
}

inline double pair_rank_reward(std::span<const GenerationGroup> batch, std::span<const double> targets,
                               std::size_t i, std::size_t k, const RewardConfig& cfg) {
  return pair_rank_reward_outcome(batch, targets, i, k, cfg).value;
}

/// Reward function bound to a configuration and the training bin counts.
struct RewardModel {
  RewardConfig cfg;
  std::vector<int> bin_counts;  // needed by DiscoMAE only

  RewardOutcome operator()(std::span<const GenerationGroup> batch, std::span<const double> targets,
                           std::span<const int> bins, std::size_t i, std::size_t k) const {
    switch (cfg.kind) {
      case RewardKind::CCC: return ccc_reward_outcome(batch, targets, i, k, cfg);
      case RewardKind::Spearman: return spearman_reward_outcome(batch, targets, i, k, cfg);
      case RewardKind::PairRank: return pair_rank_reward_outcome(batch, targets, i, k, cfg);
      case RewardKind::MAE:
        detail::check_focus(batch, targets, i, k);
        return {mae_reward(batch[i].values[k], targets[i], cfg), false};
      case RewardKind::DiscoMAE:
        detail::check_focus(batch, targets, i, k);
        return {disco_mae_reward(batch[i].values[k], targets[i], bins[i], bin_counts, cfg), false};
    }
    throw std::logic_error("unhandled reward kind");
  }
};

/// Per-trajectory rewards for a whole minibatch: result[i][k].
struct BatchRewards {
  std::vector<std::vector<double>> rewards;
  int degraded = 0;
};

inline BatchRewards compute_batch_rewards(const RewardModel& model, std::span<const GenerationGroup> batch,
                                          std::span<const double> targets, std::span<const int> bins) {
  BatchRewards out;
  out.rewards.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.rewards[i].resize(batch[i].size());
    for (std::size_t k = 0; k < batch[i].size(); ++k) {
      const auto r = model(batch, targets, bins, i, k);
      out.rewards[i][k] = r.value;
      out.degraded += r.degraded ? 1 : 0;
    }
  }
  return out;
}

}  // namespace dirgrpo

#endif  // DIRGRPO_REWARDS_HPP_
