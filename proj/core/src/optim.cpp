#include "gatets/optim.hpp"

#include <cmath>

namespace gatets {

AdamW::AdamW(std::vector<Tensor> params, AdamWHyper hyper)
    : params_(std::move(params)) {
  state_.hyper = hyper;
  state_.first_moment.reserve(params_.size());
  state_.second_moment.reserve(params_.size());
  for (const Tensor& p : params_) {
    state_.first_moment.emplace_back(p.size(), 0.0);
    state_.second_moment.emplace_back(p.size(), 0.0);
  }
}

bool AdamW::step(double lr) {
  for (Tensor& p : params_) {
    const double* g = p.grad();
    if (!g) continue;
    for (int64_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(g[i])) {
        ++skipped_;
        return false;
      }
    }
  }
  const AdamWHyper& h = state_.hyper;
  state_.step += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state_.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state_.step));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    p.ensure_grad();
    const double* g = p.grad();
    double* v = p.data();
    std::vector<double>& m1 = state_.first_moment[pi];
    std::vector<double>& m2 = state_.second_moment[pi];
    for (int64_t i = 0; i < p.size(); ++i) {
      v[i] -= lr * h.weight_decay * v[i];
      m1[i] = h.beta1 * m1[i] + (1.0 - h.beta1) * g[i];
      m2[i] = h.beta2 * m2[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double mhat = m1[i] / bc1;
      const double vhat = m2[i] / bc2;
      v[i] -= lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
  return true;
}

void AdamW::zero_grad() {
  for (Tensor& p : params_) {
    p.ensure_grad();
    p.zero_grad();
  }
}

double cosine_lr(int64_t step, const ScheduleState& sched) {
  if (sched.warmup_steps < 0 || sched.warmup_steps >= sched.total_steps) {
    throw ConfigError("cosine_lr: need 0 <= warmup_steps < total_steps");
  }
  if (step < 0 || step > sched.total_steps) {
    throw ConfigError("cosine_lr: step " + std::to_string(step) +
                      " outside [0, total_steps]");
  }
  if (step < sched.warmup_steps) {
    return sched.base_lr * static_cast<double>(step + 1) /
           static_cast<double>(sched.warmup_steps);
  }
  const double progress =
      static_cast<double>(step - sched.warmup_steps) /
      static_cast<double>(sched.total_steps - sched.warmup_steps);
  return sched.base_lr * 0.5 * (1.0 + std::cos(progress * M_PI));
}

}  // namespace gatets
