#include "exf/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "exf/error.hpp"

namespace exf {

void AdamWConfig::validate() const {
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw InvalidInput("AdamWConfig: decay rates must lie in [0,1)");
  if (eps <= 0.0) throw InvalidInput("AdamWConfig: eps must be > 0");
  if (weight_decay < 0.0) throw InvalidInput("AdamWConfig: weight_decay must be >= 0");
  if (base_lr <= 0.0) throw InvalidInput("AdamWConfig: base_lr must be > 0");
}

AdamWState adamw_init(std::size_t param_count, const AdamWConfig& cfg) {
  cfg.validate();
  AdamWState st;
  st.cfg = cfg;
  st.m.assign(param_count, 0.0);
  st.v.assign(param_count, 0.0);
  return st;
}

void adamw_step(std::span<double> params, std::span<const double> grads,
                AdamWState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw InvalidInput("adamw_step: parameter/gradient/state size mismatch");
  state.step += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.cfg.eps) +
                 lr * state.cfg.weight_decay * params[i];
  }
}

void Schedule::validate() const {
  if (total_epochs == 0) throw InvalidInput("Schedule: total_epochs must be >= 1");
  if (warmup_epochs >= total_epochs)
    throw InvalidInput("Schedule: warmup_epochs must be < total_epochs");
  if (base_lr <= 0.0) throw InvalidInput("Schedule: base_lr must be > 0");
  if (min_lr < 0.0 || min_lr > base_lr)
    throw InvalidInput("Schedule: min_lr must lie in [0, base_lr]");
}

double lr_at(const Schedule& s, double epoch) {
  s.validate();
  if (epoch < 0.0 || epoch > static_cast<double>(s.total_epochs))
    throw InvalidInput("lr_at: epoch " + std::to_string(epoch) + " out of [0, " +
                       std::to_string(s.total_epochs) + "]");
  const double warm = static_cast<double>(s.warmup_epochs);
  if (epoch < warm) return s.base_lr * (epoch / warm);
  double progress = (epoch - warm) / (static_cast<double>(s.total_epochs) - warm);
  return s.min_lr +
         0.5 * (s.base_lr - s.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace exf
