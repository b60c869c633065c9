#pragma once

// theta <- theta - alpha * eta . g with plain, Adagrad and Adadelta weightings.
//
// Adadelta accumulates the squared update with a plus sign,
// E <- rho E + (1 - rho) (eta . g)^2. A minus sign there would drive E
// negative and make sqrt(E + eps) undefined.

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "cmdalign/errors.hpp"
#include "cmdalign/network.hpp"

namespace cmdalign {

enum class OptimizerKind { sgd, adagrad, adadelta };

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::adadelta: return "adadelta";
  }
  return "?";
}

inline OptimizerKind optimizer_kind_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adagrad") return OptimizerKind::adagrad;
  if (s == "adadelta") return OptimizerKind::adadelta;
  throw ConfigError("unknown optimizer kind '" + std::string(s) + "'");
}

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adadelta;
  double learning_rate = 1.0;  // alpha; ignored by adadelta, which uses 1
  double rho = 0.95;
  double epsilon = 1e-6;

  static OptimizerSettings sgd(double alpha) { return {OptimizerKind::sgd, alpha, 0.0, 0.0}; }
  static OptimizerSettings adagrad(double alpha = 0.01, double eps = 1e-8) {
    return {OptimizerKind::adagrad, alpha, 0.0, eps};
  }
  static OptimizerSettings adadelta(double rho = 0.95, double eps = 1e-6) {
    return {OptimizerKind::adadelta, 1.0, rho, eps};
  }

  void validate() const {
    if (kind != OptimizerKind::adadelta && !(learning_rate > 0.0))
      throw ConfigError("optimizer: learning_rate must be > 0");
    if (kind == OptimizerKind::adadelta && !(rho >= 0.0 && rho < 1.0))
      throw ConfigError("optimizer: rho must be in [0, 1)");
    if (kind == OptimizerKind::adadelta && !(epsilon > 0.0))
      throw ConfigError("optimizer: adadelta epsilon must be > 0");
    if (kind == OptimizerKind::adagrad && !(epsilon >= 0.0))
      throw ConfigError("optimizer: epsilon must be >= 0");
  }
};

class Optimizer {
 public:
  explicit Optimizer(const OptimizerSettings& settings, const NetworkParams& shape)
      : settings_(settings),
        grad_sq_(Gradients::zeros_like(shape)),
        update_sq_(Gradients::zeros_like(shape)) {
    settings_.validate();
  }

  const OptimizerSettings& settings() const noexcept { return settings_; }
  // G accumulators (Adagrad sum, Adadelta running mean of g^2).
  const Gradients& grad_accumulator() const noexcept { return grad_sq_; }
  // E accumulators (Adadelta running mean of squared updates).
  const Gradients& update_accumulator() const noexcept { return update_sq_; }
  std::size_t steps() const noexcept { return steps_; }

  void step(NetworkParams& p, const Gradients& g) {
    if (!g.finite()) throw NonFiniteError("optimizer: non-finite gradient");
    auto theta = p.blocks();
    const auto grad = g.blocks();
    auto gsq = grad_sq_.blocks();
    auto usq = update_sq_.blocks();
    for (std::size_t k = 0; k < theta.size(); ++k)
      detail::require_dims(theta[k].size() == grad[k].size() && gsq[k].size() == grad[k].size(),
                           "optimizer: shape mismatch");

    const double alpha = settings_.learning_rate;
    const double rho = settings_.rho;
    const double eps = settings_.epsilon;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      for (std::size_t i = 0; i < theta[k].size(); ++i) {
        const double gi = grad[k][i];
        switch (settings_.kind) {
          case OptimizerKind::sgd:
            theta[k][i] -= alpha * gi;
            break;
          case OptimizerKind::adagrad: {
            gsq[k][i] += gi * gi;
            const double denom = std::sqrt(gsq[k][i] + eps);
            if (denom > 0.0) theta[k][i] -= alpha * gi / denom;  // denom == 0 implies gi == 0
            break;
          }
          case OptimizerKind::adadelta: {
            gsq[k][i] = rho * gsq[k][i] + (1.0 - rho) * gi * gi;
            const double delta = std::sqrt(usq[k][i] + eps) / std::sqrt(gsq[k][i] + eps) * gi;
            theta[k][i] -= delta;
            usq[k][i] = rho * usq[k][i] + (1.0 - rho) * delta * delta;
            break;
          }
        }
      }
    }
    ++steps_;
  }

 private:
  OptimizerSettings settings_;
  Gradients grad_sq_;
  Gradients update_sq_;
  std::size_t steps_ = 0;
};

}  // namespace cmdalign
