#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gatets/tensor.hpp"

namespace testutil {

inline gatets::Tensor random_tensor(gatets::Shape shape, std::mt19937_64& rng,
                                    bool requires_grad = true,
                                    double stddev = 1.0) {
  gatets::Tensor t = gatets::Tensor::zeros(std::move(shape), requires_grad);
  std::normal_distribution<double> dist(0.0, stddev);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  return t;
}

// Weighted-sum readout so every output element contributes a distinct
// gradient signal.
inline gatets::Tensor weighted_sum(const gatets::Tensor& out,
                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  gatets::Tensor w = gatets::Tensor::zeros(out.shape());
  for (int64_t i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return gatets::sum(gatets::mul(out, w));
}

struct GradCheck {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central finite differences against the tape's gradients. `loss_fn` must
// rebuild the forward pass from the current parameter values on every call.
inline GradCheck check_gradients(const std::vector<gatets::Tensor>& params,
                                 const std::function<double()>& loss_fn_value,
                                 const std::function<gatets::Tensor()>& loss_fn,
                                 double h = 1e-5) {
  for (const gatets::Tensor& p : params) {
    p.ensure_grad();
    p.zero_grad();
  }
  gatets::Tensor loss = loss_fn();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (const gatets::Tensor& p : params) {
    analytic.emplace_back(p.grad(), p.grad() + p.size());
  }
  GradCheck result;
  gatets::NoGradGuard guard;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const gatets::Tensor& p = params[pi];
    for (int64_t i = 0; i < p.size(); ++i) {
      const double saved = p.data()[i];
      p.data()[i] = saved + h;
      const double up = loss_fn_value();
      p.data()[i] = saved - h;
      const double down = loss_fn_value();
      p.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

inline GradCheck check_gradients(const std::vector<gatets::Tensor>& params,
                                 const std::function<gatets::Tensor()>& loss_fn,
                                 double h = 1e-5) {
  return check_gradients(
      params, [&loss_fn]() { return loss_fn().item(); }, loss_fn, h);
}

}  // namespace testutil
