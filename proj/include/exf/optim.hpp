#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace exf {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  double base_lr = 1e-4;

  void validate() const;
};

// Decoupled-decay Adam state: bias-corrected first/second moments per
// parameter, update theta -= lr * mhat/(sqrt(vhat)+eps) + lr * wd * theta.
struct AdamWState {
  AdamWConfig cfg;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

AdamWState adamw_init(std::size_t param_count, const AdamWConfig& cfg);

void adamw_step(std::span<double> params, std::span<const double> grads,
                AdamWState& state, double lr);

// Linear warmup from 0 to base_lr over warmup_epochs, then cosine decay
// down to min_lr at total_epochs. Continuous at the warmup boundary.
struct Schedule {
  std::size_t warmup_epochs = 0;
  std::size_t total_epochs = 1;
  double base_lr = 1e-4;
  double min_lr = 0.0;

  void validate() const;
};

double lr_at(const Schedule& s, double epoch);

}  // namespace exf
