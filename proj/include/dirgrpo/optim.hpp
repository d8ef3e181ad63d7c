#ifndef DIRGRPO_OPTIM_HPP_
#define DIRGRPO_OPTIM_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>

#include "dirgrpo/errors.hpp"

namespace dirgrpo {

enum class OptimizerKind { Sgd, AdamW };
enum class LrSchedule { Constant, Linear };

inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adamw") return OptimizerKind::AdamW;
  throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

inline const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adamw"; }

inline LrSchedule parse_lr_schedule(std::string_view s) {
  if (s == "constant") return LrSchedule::Constant;
  if (s == "linear") return LrSchedule::Linear;
  throw ConfigError("unknown lr schedule '" + std::string(s) + "'");
}

inline const char* lr_schedule_name(LrSchedule s) { return s == LrSchedule::Constant ? "constant" : "linear"; }

/// Learning rate at `step` of `total_steps` (linear decays to zero).
inline double scheduled_lr(double base, LrSchedule schedule, long step, long total_steps) {
  if (schedule == LrSchedule::Constant || total_steps <= 0) return base;
  return base * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

struct AdamWParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Applies descent steps to a weight matrix. Plain SGD is stateless; AdamW
/// keeps first/second moment estimates across calls.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::Sgd, AdamWParams adam = {}) : kind_(kind), adam_(adam) {}

  /// weights -= lr * update(direction), where `direction` is a gradient of
  /// the loss being minimized.
  void descend(Eigen::MatrixXd& weights, const Eigen::MatrixXd& direction, double lr) {
    if (kind_ == OptimizerKind::Sgd) {
      weights.noalias() -= lr * direction;
      return;
    }
    if (m_.size() == 0) {
      m_ = Eigen::MatrixXd::Zero(weights.rows(), weights.cols());
      v_ = Eigen::MatrixXd::Zero(weights.rows(), weights.cols());
    }
    ++t_;
    m_ = adam_.beta1 * m_ + (1.0 - adam_.beta1) * direction;
    v_ = adam_.beta2 * v_ + (1.0 - adam_.beta2) * direction.cwiseProduct(direction);
    const double c1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
    weights *= (1.0 - lr * adam_.weight_decay);
    weights.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + adam_.eps);
  }

  OptimizerKind kind() const { return kind_; }

 private:
  OptimizerKind kind_;
  AdamWParams adam_;
  Eigen::MatrixXd m_;
  Eigen::MatrixXd v_;
  long t_ = 0;
};

}  // namespace dirgrpo

#endif  // DIRGRPO_OPTIM_HPP_
