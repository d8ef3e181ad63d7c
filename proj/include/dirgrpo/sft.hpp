#ifndef DIRGRPO_SFT_HPP_
#define DIRGRPO_SFT_HPP_

// Supervised baselines: teacher-forced cross-entropy on the target's token
// sequence, optionally with digit-distance token weights (SFT-Soft).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dirgrpo/dataset.hpp"
#include "dirgrpo/errors.hpp"
#include "dirgrpo/grpo.hpp"
#include "dirgrpo/io.hpp"
#include "dirgrpo/optim.hpp"
#include "dirgrpo/policy.hpp"

namespace dirgrpo {

struct SftConfig {
  double lr = 0.5;
  int epochs = 2;
  int batch_size = 32;
  bool soft = false;
  double soft_cap = 5.0;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  LrSchedule lr_schedule = LrSchedule::Constant;
};

inline void validate(const SftConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("sft.lr must be > 0");
  if (cfg.epochs < 1) throw ConfigError("sft.epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("sft.batch_size must be >= 1");
  if (!(cfg.soft_cap >= 1.0)) throw ConfigError("sft.soft_cap must be >= 1");
}

/// Teacher-forcing tokens for a target: the value class for the direct
/// family; decimal digits of round(target) then EOS for the digit family.
inline std::vector<Token> target_tokens(double target, const Policy& p) {
  const long long v = std::llround(target);
  if (v < 0) throw std::invalid_argument("target_tokens: negative target");
  if (p.family() == PolicyFamily::DirectCategorical) {
    if (v >= p.vocab()) throw std::invalid_argument("target_tokens: target outside value classes");
    return {static_cast<Token>(v)};
  }
  std::vector<Token> out;
  for (char c : std::to_string(v)) out.push_back(c - '0');
  out.push_back(digit_tokens::kEos);
  if (static_cast<int>(out.size()) > p.max_len()) throw std::invalid_argument("target_tokens: target exceeds max_len");
  return out;
}

/// SFT-Soft weight for one target position given the model's argmax token.
inline double soft_token_weight(const Policy& p, Token argmax, Token target, double cap) {
  if (p.family() == PolicyFamily::DirectCategorical) {
    return std::min(1.0 + std::abs(argmax - target) / 10.0, cap);
  }
  if (target == digit_tokens::kEos || target == digit_tokens::kBad) return 1.0;
  // a non-digit argmax at a digit position is the largest possible deviation
  if (argmax >= 10) return cap;
  return std::min(1.0 + std::abs(argmax - target), cap);
}

struct SftLoss {
  double ce = 0.0;        // mean per-token NLL, unweighted
  double weighted = 0.0;  // mean per-token weighted NLL (the minimized objective)
  Eigen::MatrixXd gradient;  // d weighted / dW
};

inline SftLoss sft_loss(const Policy& p, std::span<const Sample> batch, const SftConfig& cfg) {
  SftLoss out;
  out.gradient = Eigen::MatrixXd::Zero(p.weights().rows(), p.weights().cols());
  long tokens = 0;
  for (const auto& s : batch) {
    const auto target = target_tokens(s.target, p);
    for (const auto& st : teacher_forced_steps(p, s.features, target)) {
      double w = 1.0;
      if (cfg.soft) {
        Eigen::Index am = 0;
        st.logp.maxCoeff(&am);
        w = soft_token_weight(p, static_cast<Token>(am), st.token, cfg.soft_cap);
      }
      const double nll = -st.logp[st.token];
      out.ce += nll;
      out.weighted += w * nll;
      Eigen::VectorXd g = st.logp.array().exp();
      g[st.token] -= 1.0;
      out.gradient.noalias() += (w * g) * st.input.transpose();
      ++tokens;
    }
  }
  if (tokens > 0) {
    const double inv = 1.0 / static_cast<double>(tokens);
    out.ce *= inv;
    out.weighted *= inv;
    out.gradient *= inv;
  }
  return out;
}

struct SftStepResult {
  Policy params;
  double ce_loss = 0.0;
};

inline SftStepResult sft_step(const Policy& params, std::span<const Sample> batch, const SftConfig& cfg,
                              Optimizer& optimizer, double lr, long step = 0) {
  const auto loss = sft_loss(params, batch, cfg);
  detail::require_finite(loss.gradient, "sft gradient", step);
  SftStepResult out{params, loss.ce};
  optimizer.descend(out.params.weights(), loss.gradient, lr);
  detail::require_finite(out.params.weights(), "updated weights", step);
  return out;
}

inline SftStepResult sft_step(const Policy& params, std::span<const Sample> batch, const SftConfig& cfg) {
  Optimizer sgd(OptimizerKind::Sgd);
  return sft_step(params, batch, cfg, sgd, cfg.lr);
}

struct SftStats {
  long step = 0;
  double ce_loss = 0.0;
};

struct SftTrainResult {
  Policy params;
  std::vector<SftStats> history;
};

using SftStepCallback = std::function<void(const Policy&, const SftStats&)>;

inline SftTrainResult train_sft(const Policy& initial, const std::vector<Sample>& train_set, const SftConfig& cfg,
                                const SftStepCallback& on_step = {}) {
  validate(cfg);
  if (train_set.empty()) throw std::invalid_argument("train_sft: empty training set");
  SftTrainResult out{initial, {}};
  Optimizer optimizer(cfg.optimizer);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const long total_steps = static_cast<long>((train_set.size() + bs - 1) / bs) * cfg.epochs;
  long step = 0;
  std::vector<Sample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : epoch_batches(train_set.size(), cfg.batch_size, cfg.seed, epoch, 1)) {
      batch.clear();
      for (auto j : idx) batch.push_back(train_set[j]);
      const double lr = scheduled_lr(cfg.lr, cfg.lr_schedule, step, total_steps);
      auto res = sft_step(out.params, batch, cfg, optimizer, lr, step);
      out.params = std::move(res.params);
      out.history.push_back({step, res.ce_loss});
      if (on_step) on_step(out.params, out.history.back());
      ++step;
    }
  }
  return out;
}

inline std::string sft_history_to_csv(const std::vector<SftStats>& history) {
  std::string out = "step,ce_loss\n";
  for (const auto& s : history) out += std::to_string(s.step) + ',' + io::format_double(s.ce_loss) + '\n';
  return out;
}

}  // namespace dirgrpo

#endif  // DIRGRPO_SFT_HPP_
