#include "gatets/selfcheck.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "gatets/model.hpp"
#include "gatets/nn.hpp"
#include "gatets/optim.hpp"

namespace gatets {

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad,
                     double stddev = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  std::normal_distribution<double> dist(0.0, stddev);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  return t;
}

Tensor readout(const Tensor& out, uint64_t salt) {
  Tensor w = Tensor::zeros(out.shape());
  for (int64_t i = 0; i < w.size(); ++i) {
    w.data()[i] = 0.5 + stream_uniform(salt, 17, static_cast<uint64_t>(i));
  }
  return sum(mul(out, w));
}

double finite_difference_max_err(const std::vector<Tensor>& params,
                                 const std::function<Tensor()>& loss_fn,
                                 bool perturb) {
  for (const Tensor& p : params) {
    p.ensure_grad();
    p.zero_grad();
  }
  Tensor loss = loss_fn();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (const Tensor& p : params) {
    analytic.emplace_back(p.grad(), p.grad() + p.size());
  }
  if (perturb && !analytic.empty() && !analytic[0].empty()) {
    analytic[0][0] += 1e-2;
  }
  const double h = 1e-5;
  double max_rel = 0.0;
  NoGradGuard guard;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const Tensor& p = params[pi];
    for (int64_t i = 0; i < p.size(); ++i) {
      const double saved = p.data()[i];
      p.data()[i] = saved + h;
      const double up = loss_fn().item();
      p.data()[i] = saved - h;
      const double down = loss_fn().item();
      p.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
    }
  }
  return max_rel;
}

CheckResult gradient_check(const std::string& name,
                           const std::vector<Tensor>& params,
                           const std::function<Tensor()>& loss_fn,
                           bool perturb, double tol = 1e-4) {
  const double err = finite_difference_max_err(params, loss_fn, perturb);
  std::ostringstream detail;
  detail << "max rel err " << err << " (tol " << tol << ")";
  return {name, err < tol, detail.str()};
}

}  // namespace

std::vector<CheckResult> run_selfcheck(uint64_t seed, bool perturb_gradient) {
  std::vector<CheckResult> results;
  std::mt19937_64 rng(seed);

  {
    Tensor x = random_tensor({3, 4}, rng, false);
    Tensor w = random_tensor({4, 3}, rng, true);
    Tensor b = random_tensor({3}, rng, true);
    results.push_back(gradient_check(
        "grad: linear", {w, b},
        [&]() { return readout(linear(x, w, b), 1); }, perturb_gradient));
  }
  {
    Tensor x = random_tensor({2, 5}, rng, true);
    results.push_back(gradient_check(
        "grad: softmax", {x}, [&]() { return readout(softmax(x), 2); },
        false));
  }
  {
    Tensor x = random_tensor({3, 6}, rng, true);
    Tensor g = random_tensor({6}, rng, true);
    Tensor b = random_tensor({6}, rng, true);
    results.push_back(gradient_check(
        "grad: layer_norm", {x, g, b},
        [&]() { return readout(layer_norm(x, g, b), 3); }, false));
  }
  {
    MhsaParams attn = MhsaParams::init(4, rng);
    Tensor x = random_tensor({1, 3, 4}, rng, true);
    std::vector<Tensor> params{x};
    for (Tensor* t : attn.tensors()) params.push_back(*t);
    results.push_back(gradient_check(
        "grad: multi_head_self_attention", params,
        [&]() { return readout(multi_head_self_attention(x, attn, 2), 4); },
        false));
  }
  {
    Tensor x = random_tensor({4, 4}, rng, true);
    results.push_back(gradient_check(
        "grad: dropout (fixed mask)", {x},
        [&]() {
          RngCtx ctx{true, 11, 5, 0};
          return readout(dropout(x, 0.3, ctx), 5);
        },
        false));
  }
  {
    Tensor pred = random_tensor({2, 3}, rng, true);
    Tensor target = random_tensor({2, 3}, rng, false);
    results.push_back(gradient_check(
        "grad: mse_loss", {pred}, [&]() { return mse_loss(pred, target); },
        false));
  }
  {
    LstmParams lstm = LstmParams::init(1, 4, 2, rng);
    Tensor x = random_tensor({1, 3, 1}, rng, true);
    std::vector<Tensor> params{x};
    for (Tensor* t : lstm.tensors()) params.push_back(*t);
    results.push_back(gradient_check(
        "grad: lstm_forward", params,
        [&]() { return readout(lstm_forward(x, lstm, 4), 6); }, false));
  }
  {
    AttentionGateParams gate = AttentionGateParams::init(3, 4, rng);
    Tensor x = random_tensor({1, 4, 3}, rng, true);
    std::vector<Tensor> params{x};
    for (Tensor* t : gate.tensors()) params.push_back(*t);
    results.push_back(gradient_check(
        "grad: attention_gate_scores", params,
        [&]() { return readout(attention_gate_scores(x, gate), 7); }, false));
  }
  {
    Tensor logits = random_tensor({2, 3, 5}, rng, true);
    results.push_back(gradient_check(
        "grad: topk_renormalize", {logits},
        [&]() {
          RoutingDecision d = topk_renormalize(softmax(logits), 2);
          return readout(d.weights, 8);
        },
        false));
  }
  {
    GateTSConfig c;
    c.context = 6;
    c.horizon = 2;
    c.d_model = 4;
    c.n_heads = 2;
    c.n_experts = 3;
    c.active_experts = 2;
    c.ffn_width = 6;
    c.dropout = 0.0;
    c.seed = seed;
    GateTS model(c);
    Tensor x = random_tensor({2, 6}, rng, false);
    Tensor target = random_tensor({2, 2}, rng, false);
    std::vector<Tensor> params = model.parameters();
    results.push_back(gradient_check(
        "grad: full GateTS model", params,
        [&]() {
          RngCtx ctx{false, 0, 0, 0};
          return mse_loss(model.forward(x, ctx).forecast, target);
        },
        false));
  }

  {
    // Production contraction vs the literal Kronecker route.
    double worst = 0.0;
    std::uniform_int_distribution<int64_t> dim(1, 8);
    for (int rep = 0; rep < 20; ++rep) {
      const int64_t d = dim(rng);
      const int64_t experts = dim(rng);
      AttentionGateParams p = AttentionGateParams::init(d, experts, rng);
      Tensor x = random_tensor({1, 4, d}, rng, false);
      Tensor production = attention_gate_scores(x, p);
      const std::vector<double> reference = attention_gate_scores_kron(x, p);
      for (int64_t i = 0; i < production.size(); ++i) {
        worst = std::max(worst, std::abs(production.data()[i] - reference[i]));
      }
    }
    std::ostringstream detail;
    detail << "max abs diff " << worst << " (tol 1e-10)";
    results.push_back({"kron/bilinear route equivalence", worst < 1e-10,
                       detail.str()});
  }

  {
    // Top-k sparsity: exactly k survivors, unit sum, order preserved.
    bool ok = true;
    std::string why;
    for (int64_t experts : {2, 4, 8}) {
      Tensor probs = softmax(random_tensor({40, experts}, rng, false, 2.0));
      for (int64_t k = 1; k <= experts && ok; ++k) {
        RoutingDecision d = topk_renormalize(probs, k);
        for (int64_t r = 0; r < 40 && ok; ++r) {
          int64_t nonzero = 0;
          double total = 0.0;
          for (int64_t e = 0; e < experts; ++e) {
            const double w = d.weights.data()[r * experts + e];
            nonzero += (w != 0.0);
            total += w;
          }
          if (nonzero != k || std::abs(total - 1.0) > 1e-6) {
            ok = false;
            why = "row " + std::to_string(r) + " k=" + std::to_string(k);
          }
        }
      }
    }
    results.push_back({"top-k exact sparsity", ok, ok ? "all rows" : why});
  }

  {
    // Sparse gather/scatter evaluation equals the dense path.
    double worst = 0.0;
    for (uint64_t s : {seed + 1, seed + 2, seed + 3}) {
      GateTSConfig c;
      c.context = 8;
      c.horizon = 3;
      c.d_model = 6;
      c.n_heads = 2;
      c.n_experts = 4;
      c.active_experts = 2;
      c.ffn_width = 6;
      c.dropout = 0.0;
      c.seed = s;
      GateTS model(c);
      Tensor x = random_tensor({3, 8}, rng, false);
      NoGradGuard guard;
      RngCtx c1{false, 0, 0, 0}, c2{false, 0, 0, 0};
      Tensor sparse = model.forward(x, c1, false).forecast;
      Tensor dense = model.forward(x, c2, true).forecast;
      for (int64_t i = 0; i < sparse.size(); ++i) {
        worst = std::max(worst, std::abs(sparse.data()[i] - dense.data()[i]));
      }
    }
    std::ostringstream detail;
    detail << "max abs diff " << worst << " (tol 1e-12)";
    results.push_back({"sparse == dense model evaluation", worst < 1e-12,
                       detail.str()});
  }

  return results;
}

}  // namespace gatets
