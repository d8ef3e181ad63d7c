#ifndef DIRGRPO_GRPO_HPP_
#define DIRGRPO_GRPO_HPP_

// Group Relative Policy Optimization on the toy policies.
//
// Per step: sample K trajectories per input, score them with a (possibly
// batch-level) reward, normalize rewards within each group into advantages,
// and take one ascent step on the clipped surrogate with a k3 KL penalty
// toward the reference policy.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dirgrpo/dataset.hpp"
#include "dirgrpo/errors.hpp"
#include "dirgrpo/io.hpp"
#include "dirgrpo/optim.hpp"
#include "dirgrpo/policy.hpp"
#include "dirgrpo/rewards.hpp"
#include "dirgrpo/rng.hpp"

namespace dirgrpo {

enum class AdvantageVariant { Standard, DrGrpo };

inline AdvantageVariant parse_advantage_variant(std::string_view s) {
  if (s == "standard") return AdvantageVariant::Standard;
  if (s == "drgrpo") return AdvantageVariant::DrGrpo;
  throw ConfigError("unknown advantage variant '" + std::string(s) + "'");
}

inline const char* advantage_variant_name(AdvantageVariant v) {
  return v == AdvantageVariant::Standard ? "standard" : "drgrpo";
}

struct GrpoConfig {
  int k = 4;
  int batch_size = 16;
  double beta_kl = 0.04;
  double clip_eps = 0.2;
  double lr = 0.05;
  int epochs = 4;
  AdvantageVariant adv_variant = AdvantageVariant::Standard;
  double eps_adv = 1e-4;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  LrSchedule lr_schedule = LrSchedule::Constant;
};

inline void validate(const GrpoConfig& cfg) {
  if (cfg.k < 2) throw ConfigError("grpo.K must be >= 2");
  if (cfg.batch_size < 2) throw ConfigError("grpo.batch_size must be >= 2");
  if (!(cfg.beta_kl >= 0.0)) throw ConfigError("grpo.beta_kl must be >= 0");
  if (!(cfg.clip_eps > 0.0 && cfg.clip_eps < 1.0)) throw ConfigError("grpo.clip_eps must be in (0, 1)");
  if (!(cfg.lr > 0.0)) throw ConfigError("grpo.lr must be > 0");
  if (cfg.epochs < 1) throw ConfigError("grpo.epochs must be >= 1");
  if (!(cfg.eps_adv >= 0.0)) throw ConfigError("grpo.eps_adv must be >= 0");
}

struct GroupAdvantages {
  std::vector<double> rewards;
  std::vector<double> advantages;
};

/// Standard: (r - mean) / (std + eps) with population std. DrGrpo: r - mean.
inline GroupAdvantages compute_advantages(std::span<const double> rewards, AdvantageVariant variant,
                                          double eps_adv) {
  if (rewards.size() < 2) throw std::invalid_argument("compute_advantages: K must be >= 2");
  GroupAdvantages g;
  g.rewards.assign(rewards.begin(), rewards.end());
  const auto n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  g.advantages.reserve(rewards.size());
  for (double r : rewards) g.advantages.push_back(r - mean);
  if (variant == AdvantageVariant::Standard) {
    double var = 0.0;
    for (double a : g.advantages) var += a * a;
    const double denom = std::sqrt(var / n) + eps_adv;
    for (double& a : g.advantages) a /= denom;
  }
  return g;
}

inline GroupAdvantages compute_advantages(std::span<const double> rewards, const GrpoConfig& cfg) {
  return compute_advantages(rewards, cfg.adv_variant, cfg.eps_adv);
}

/// k3 estimator of KL(new || ref) from one sample; always >= 0.
inline double kl_penalty(double logp_new, double logp_ref) {
  const double d = logp_ref - logp_new;
  return std::exp(d) - d - 1.0;
}

/// One trajectory ready for the surrogate: inputs plus frozen quantities.
struct SurrogateItem {
  std::span<const double> features;
  std::span<const Token> tokens;
  double logp_old = 0.0;
  double logp_ref = 0.0;
  double advantage = 0.0;
};

struct SurrogateResult {
  Eigen::MatrixXd gradient;  // ascent direction of the objective
  double objective = 0.0;
  double mean_kl = 0.0;
  double max_ratio_deviation = 0.0;  // max |rho - 1|
};

/// Mean over items of min(rho A, clip(rho, 1-eps, 1+eps) A) - beta k3, and
/// its exact gradient with respect to the current weights.
inline SurrogateResult surrogate_gradient(const Policy& current, std::span<const SurrogateItem> items,
                                          double clip_eps, double beta_kl) {
  SurrogateResult out;
  out.gradient = Eigen::MatrixXd::Zero(current.weights().rows(), current.weights().cols());
  if (items.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(items.size());
  for (const auto& it : items) {
    const double logp_new = logprob(current, it.features, it.tokens);
    const double ratio = std::exp(logp_new - it.logp_old);
    const double unclipped = ratio * it.advantage;
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * it.advantage;
    const double kl = kl_penalty(logp_new, it.logp_ref);
    out.objective += (std::min(unclipped, clipped) - beta_kl * kl) * inv_n;
    out.mean_kl += kl * inv_n;
    out.max_ratio_deviation = std::max(out.max_ratio_deviation, std::abs(ratio - 1.0));

    // d/dlogp_new of the per-item objective
    double coef = unclipped <= clipped ? unclipped : 0.0;
    coef -= beta_kl * (1.0 - std::exp(it.logp_ref - logp_new));
    if (coef != 0.0) accumulate_logprob_gradient(current, it.features, it.tokens, coef * inv_n, out.gradient);
  }
  return out;
}

struct StepStats {
  long step = 0;
  double mean_reward = 0.0;
  double mean_abs_adv = 0.0;
  double kl = 0.0;
  double valid_frac = 0.0;
  int degraded_rewards = 0;
  double max_ratio_deviation = 0.0;
  double objective = 0.0;
};

struct GrpoStepResult {
  Policy params;
  StepStats stats;
};

namespace detail {

inline void require_finite(const Eigen::MatrixXd& m, const char* what, long step) {
  if (!m.allFinite()) {
    std::ostringstream ss;
    ss << what << " contains NaN/Inf at step " << step << " (max |entry| " << m.cwiseAbs().maxCoeff() << ")";
    throw NumericError(ss.str());
  }
}

}  // namespace detail

/// One on-policy GRPO update. `old` is the policy that generated the
/// samples (the current params on entry), `ref` anchors the KL term.
inline GrpoStepResult grpo_step(const Policy& params, const Policy& ref, std::span<const Sample> batch,
                                const RewardModel& reward, const GrpoConfig& cfg, const RngStream& rng,
                                Optimizer& optimizer, double lr, long step = 0) {
  if (batch.size() < 2) {
    throw std::invalid_argument("grpo_step: batch-level rewards need at least 2 samples per batch");
  }
  if (cfg.k < 2) throw std::invalid_argument("grpo_step: K must be >= 2");
  const Policy old = snapshot(params);

  // (2)-(3) sample and parse
  std::vector<std::vector<Trajectory>> rollouts(batch.size());
  std::vector<GenerationGroup> groups;
  std::vector<double> targets;
  std::vector<int> bins;
  groups.reserve(batch.size());
  int valid = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    RngStream stream = rng.fork(i);
    rollouts[i] = sample_generations(old, batch[i].features, cfg.k, stream);
    std::vector<std::optional<double>> values;
    values.reserve(rollouts[i].size());
    for (const auto& tr : rollouts[i]) {
      values.push_back(tr.parsed.value);
      valid += tr.parsed.valid() ? 1 : 0;
    }
    groups.emplace_back(batch[i].id, std::move(values));
    targets.push_back(batch[i].target);
    bins.push_back(batch[i].bin);
  }

  // (4) rewards, (5) advantages
  const auto scored = compute_batch_rewards(reward, groups, targets, bins);
  const auto variant = reward.cfg.kind == RewardKind::DiscoMAE ? AdvantageVariant::DrGrpo : cfg.adv_variant;
  std::vector<SurrogateItem> items;
  items.reserve(batch.size() * static_cast<std::size_t>(cfg.k));
  StepStats stats;
  stats.step = step;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto adv = compute_advantages(scored.rewards[i], variant, cfg.eps_adv);
    for (std::size_t k = 0; k < rollouts[i].size(); ++k) {
      const auto& tr = rollouts[i][k];
      if (!std::isfinite(adv.advantages[k])) throw NumericError("non-finite advantage at step " + std::to_string(step));
      items.push_back({batch[i].features, tr.tokens, tr.logprob, logprob(ref, batch[i].features, tr.tokens),
                       adv.advantages[k]});
      stats.mean_reward += scored.rewards[i][k];
      stats.mean_abs_adv += std::abs(adv.advantages[k]);
    }
  }
  const auto n = static_cast<double>(items.size());
  stats.mean_reward /= n;
  stats.mean_abs_adv /= n;
  stats.valid_frac = valid / n;
  stats.degraded_rewards = scored.degraded;

  // (6) one ascent step on the surrogate
  auto sur = surrogate_gradient(params, items, cfg.clip_eps, cfg.beta_kl);
  detail::require_finite(sur.gradient, "surrogate gradient", step);
  stats.kl = sur.mean_kl;
  stats.max_ratio_deviation = sur.max_ratio_deviation;
  stats.objective = sur.objective;

  GrpoStepResult result{params, stats};
  optimizer.descend(result.params.weights(), -sur.gradient, lr);
  detail::require_finite(result.params.weights(), "updated weights", step);
  return result;
}

/// Convenience overload: plain SGD at cfg.lr.
inline GrpoStepResult grpo_step(const Policy& params, const Policy& ref, std::span<const Sample> batch,
                                const RewardModel& reward, const GrpoConfig& cfg, const RngStream& rng) {
  Optimizer sgd(OptimizerKind::Sgd);
  return grpo_step(params, ref, batch, reward, cfg, rng, sgd, cfg.lr);
}

/// Shuffled minibatch index lists for one epoch; a trailing remainder too
/// small to form a batch of `min_batch` is dropped.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size, std::uint64_t seed,
                                                           int epoch, std::size_t min_batch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(stream_key({seed, 0x73687566ULL, static_cast<std::uint64_t>(epoch)}));
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(n, start + static_cast<std::size_t>(batch_size));
    if (end - start < min_batch) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

struct GrpoTrainResult {
  Policy params;
  std::vector<StepStats> history;
};

using GrpoStepCallback = std::function<void(const Policy&, const StepStats&)>;

inline GrpoTrainResult train_grpo(const Policy& initial, const std::vector<Sample>& train_set,
                                  const GrpoConfig& cfg, const RewardModel& reward,
                                  const GrpoStepCallback& on_step = {}) {
  validate(cfg);
  validate(reward.cfg);
  if (train_set.size() < 2) throw std::invalid_argument("train_grpo: need at least 2 training samples");
  GrpoTrainResult out{initial, {}};
  Optimizer optimizer(cfg.optimizer);
  const long steps_per_epoch = static_cast<long>(train_set.size() / static_cast<std::size_t>(cfg.batch_size)) +
                               (train_set.size() % static_cast<std::size_t>(cfg.batch_size) >= 2 ? 1 : 0);
  const long total_steps = steps_per_epoch * cfg.epochs;
  long step = 0;
  std::vector<Sample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : epoch_batches(train_set.size(), cfg.batch_size, cfg.seed, epoch, 2)) {
      batch.clear();
      for (auto j : idx) batch.push_back(train_set[j]);
      const Policy ref = snapshot(out.params);
      const RngStream rng(stream_key({cfg.seed, 0x67727075ULL, static_cast<std::uint64_t>(step)}));
      const double lr = scheduled_lr(cfg.lr, cfg.lr_schedule, step, total_steps);
      auto res = grpo_step(out.params, ref, batch, reward, cfg, rng, optimizer, lr, step);
      out.params = std::move(res.params);
      out.history.push_back(res.stats);
      if (on_step) on_step(out.params, res.stats);
      ++step;
    }
  }
  return out;
}

inline std::string grpo_history_to_csv(const std::vector<StepStats>& history) {
  std::string out = "step,mean_reward,mean_abs_adv,kl,valid_frac\n";
  for (const auto& s : history) {
    out += std::to_string(s.step) + ',' + io::format_double(s.mean_reward) + ',' + io::format_double(s.mean_abs_adv) +
           ',' + io::format_double(s.kl) + ',' + io::format_double(s.valid_frac) + '\n';
  }
  return out;
}

}  // namespace dirgrpo

#endif  // DIRGRPO_GRPO_HPP_
