#pragma once

#include <cstdint>
#include <vector>

#include "gatets/tensor.hpp"

namespace gatets {

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
  double base_lr = 1e-3;
};

struct OptimizerState {
  int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  AdamWHyper hyper;
};

// AdamW with decoupled weight decay: the decay shrinks parameters directly
// (theta *= 1 - lr*wd) and never enters the moment estimates.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWHyper hyper);

  // Applies one update using the parameters' accumulated gradients. If any
  // gradient is non-finite the whole update is skipped and false returned.
  bool step(double lr);

  void zero_grad();

  int64_t step_count() const { return state_.step; }
  int64_t skipped_count() const { return skipped_; }
  OptimizerState& state() { return state_; }
  const OptimizerState& state() const { return state_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  OptimizerState state_;
  int64_t skipped_ = 0;
};

struct ScheduleState {
  int64_t warmup_steps = 0;
  int64_t total_steps = 1;
  double base_lr = 1e-3;
};

// Linear warm-up to base_lr, then cosine decay to zero at total_steps.
double cosine_lr(int64_t step, const ScheduleState& sched);

}  // namespace gatets
