// Acceptance suite: one pass/fail line per criterion, non-zero exit if any
// hard criterion fails. Oracles here are independent of the library's
// backward/metric implementations.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "gatets/data.hpp"
#include "gatets/metrics.hpp"
#include "gatets/model.hpp"
#include "gatets/nn.hpp"
#include "gatets/optim.hpp"
#include "gatets/trainer.hpp"
#include "testutil.hpp"

using namespace gatets;
using testutil::check_gradients;
using testutil::random_tensor;
using testutil::weighted_sum;

namespace {

struct Outcome {
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

// ---------------------------------------------------------------------------
// 1. Gradient integrity: every differentiable op and the full model pass
//    central finite differences at rel < 1e-4, 5 seeds, under 60 s.
Outcome criterion_gradient_integrity() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_op = "none";
  auto track = [&worst, &worst_op](const std::string& op, double err) {
    if (err > worst) {
      worst = err;
      worst_op = op;
    }
  };
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    {
      Tensor x = random_tensor({3, 4}, rng, false);
      Tensor w = random_tensor({4, 3}, rng);
      Tensor b = random_tensor({3}, rng);
      track("linear", check_gradients({w, b}, [&]() {
              std::mt19937_64 wr(seed);
              return weighted_sum(linear(x, w, b), wr);
            }).max_rel_err);
    }
    {
      Tensor x = random_tensor({2, 6}, rng);
      track("softmax", check_gradients({x}, [&]() {
              std::mt19937_64 wr(seed + 1);
              return weighted_sum(softmax(x), wr);
            }).max_rel_err);
    }
    {
      Tensor x = random_tensor({3, 5}, rng);
      Tensor g = random_tensor({5}, rng);
      Tensor b = random_tensor({5}, rng);
      track("layer_norm", check_gradients({x, g, b}, [&]() {
              std::mt19937_64 wr(seed + 2);
              return weighted_sum(layer_norm(x, g, b), wr);
            }).max_rel_err);
    }
    {
      MhsaParams attn = MhsaParams::init(4, rng);
      Tensor x = random_tensor({1, 3, 4}, rng);
      std::vector<Tensor> params{x};
      for (Tensor* t : attn.tensors()) params.push_back(*t);
      track("multi_head_self_attention",
            check_gradients(params, [&]() {
              std::mt19937_64 wr(seed + 3);
              return weighted_sum(multi_head_self_attention(x, attn, 2), wr);
            }).max_rel_err);
    }
    {
      Tensor x = random_tensor({4, 4}, rng);
      track("dropout", check_gradients({x}, [&]() {
              RngCtx ctx{true, seed, 3, 0};
              std::mt19937_64 wr(seed + 4);
              return weighted_sum(dropout(x, 0.3, ctx), wr);
            }).max_rel_err);
    }
    {
      Tensor pred = random_tensor({2, 3}, rng);
      Tensor target = random_tensor({2, 3}, rng, false);
      track("mse_loss", check_gradients({pred}, [&]() {
              return mse_loss(pred, target);
            }).max_rel_err);
    }
    {
      LstmParams lstm = LstmParams::init(1, 4, 2, rng);
      Tensor x = random_tensor({1, 3, 1}, rng);
      std::vector<Tensor> params{x};
      for (Tensor* t : lstm.tensors()) params.push_back(*t);
      track("lstm_forward", check_gradients(params, [&]() {
              std::mt19937_64 wr(seed + 5);
              return weighted_sum(lstm_forward(x, lstm, 4), wr);
            }).max_rel_err);
    }
    {
      Tensor x = random_tensor({1, 4, 3}, rng);
      AttentionGateParams ap = AttentionGateParams::init(3, 4, rng);
      std::vector<Tensor> params{x};
      for (Tensor* t : ap.tensors()) params.push_back(*t);
      track("attention_gate_scores",
            check_gradients(params, [&]() {
              std::mt19937_64 wr(seed + 6);
              return weighted_sum(attention_gate_scores(x, ap), wr);
            }).max_rel_err);
      HmmGateParams hp = HmmGateParams::init(3, 4, rng);
      std::vector<Tensor> hparams{x};
      for (Tensor* t : hp.tensors()) hparams.push_back(*t);
      track("hmm_gate_scores", check_gradients(hparams, [&]() {
              std::mt19937_64 wr(seed + 7);
              return weighted_sum(hmm_gate_scores(x, hp), wr);
            }).max_rel_err);
      ClassicGateParams cp = ClassicGateParams::init(3, 4, rng);
      std::vector<Tensor> cparams{x};
      for (Tensor* t : cp.tensors()) cparams.push_back(*t);
      track("classic_gate_scores", check_gradients(cparams, [&]() {
              std::mt19937_64 wr(seed + 8);
              return weighted_sum(classic_gate_scores(x, cp), wr);
            }).max_rel_err);
    }
    {
      Tensor logits = random_tensor({2, 3, 5}, rng);
      track("topk_renormalize", check_gradients({logits}, [&]() {
              std::mt19937_64 wr(seed + 9);
              RoutingDecision d = topk_renormalize(softmax(logits), 2);
              return weighted_sum(d.weights, wr);
            }).max_rel_err);
    }
    {
      // Full model, toy scale pinned by the criterion.
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
      track("full model", check_gradients(model.parameters(), [&]() {
              RngCtx ctx{false, 0, 0, 0};
              return mse_loss(model.forward(x, ctx).forecast, target);
            }).max_rel_err);
    }
  }
  const double secs = seconds_since(start);
  std::ostringstream detail;
  detail << "worst rel err " << worst << " (" << worst_op << "), " << secs
         << "s";
  return {worst < 1e-4 && secs < 60.0, false, detail.str()};
}

// ---------------------------------------------------------------------------
// 2. Routing exactness over 1,000 random probability rows, every k in [1,E].
Outcome criterion_routing_exactness() {
  std::mt19937_64 rng(2024);
  int64_t rows_checked = 0;
  for (int64_t experts : {2, 3, 5, 8}) {
    Tensor probs = softmax(random_tensor({250, experts}, rng, false, 2.0));
    for (int64_t k = 1; k <= experts; ++k) {
      RoutingDecision d = topk_renormalize(probs, k);
      for (int64_t r = 0; r < 250; ++r) {
        int64_t nonzeros = 0;
        double total = 0.0;
        for (int64_t e = 0; e < experts; ++e) {
          const double w = d.weights.data()[r * experts + e];
          nonzeros += (w != 0.0);
          total += w;
        }
        if (nonzeros != k) {
          return {false, false,
                  "row with " + std::to_string(nonzeros) + " non-zeros, k=" +
                      std::to_string(k)};
        }
        if (std::abs(total - 1.0) >= 1e-6) {
          return {false, false, "weights sum off by " +
                                    std::to_string(std::abs(total - 1.0))};
        }
        for (int64_t a = 0; a < k; ++a) {
          for (int64_t b = a + 1; b < k; ++b) {
            const int ea = d.selected[r * k + a];
            const int eb = d.selected[r * k + b];
            const double wr = d.weights.data()[r * experts + ea] /
                              d.weights.data()[r * experts + eb];
            const double pr = probs.data()[r * experts + ea] /
                              probs.data()[r * experts + eb];
            if (std::abs(wr - pr) >= 1e-9) {
              return {false, false, "survivor ratio drifted"};
            }
          }
        }
      }
      rows_checked += 250;
    }
  }
  return {true, false, std::to_string(rows_checked) + " (row,k) cases"};
}

// ---------------------------------------------------------------------------
// 3. Kron-route and bilinear-route gate scores agree to 1e-10 on 100 configs.
Outcome criterion_gate_equivalence() {
  std::mt19937_64 rng(333);
  std::uniform_int_distribution<int64_t> dim(1, 8);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int64_t d = dim(rng);
    const int64_t experts = dim(rng);
    AttentionGateParams p = AttentionGateParams::init(d, experts, rng);
    Tensor x = random_tensor({1, 4, d}, rng, false);
    Tensor production = attention_gate_scores(x, p);
    // Independent kron route, materializing each d^2 feature.
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    for (int64_t t = 0; t < 4; ++t) {
      std::vector<double> key(d);
      for (int64_t i = 0; i < d; ++i) {
        double acc = p.b_k.data()[i];
        for (int64_t j = 0; j < d; ++j) {
          acc += x.data()[t * d + j] * p.w_k.data()[j * d + i];
        }
        key[i] = acc;
      }
      for (int64_t e = 0; e < experts; ++e) {
        std::vector<double> query(d);
        for (int64_t i = 0; i < d; ++i) {
          query[i] = p.w_q.data()[i * experts + e] + p.b_q.data()[i];
        }
        const std::vector<double> lifted = kron(key, query);
        double acc = 0.0;
        for (int64_t r = 0; r < d * d; ++r) {
          acc += p.w_e.data()[r * experts + e] * lifted[r];
        }
        worst = std::max(worst, std::abs(production.data()[t * experts + e] -
                                         acc * inv_sqrt_d));
      }
    }
  }
  std::ostringstream detail;
  detail << "max abs diff " << worst;
  return {worst < 1e-10, false, detail.str()};
}

// ---------------------------------------------------------------------------
// 4. Sparse evaluation equals dense evaluation on 10 random configs.
Outcome criterion_sparse_equals_dense() {
  std::mt19937_64 rng(444);
  std::uniform_int_distribution<int64_t> experts_dist(2, 6);
  std::uniform_int_distribution<int64_t> heads_dist(1, 2);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    GateTSConfig c;
    c.context = 6 + (rep % 3) * 2;
    c.horizon = 2 + (rep % 2);
    c.n_heads = heads_dist(rng);
    c.d_model = 4 * c.n_heads;
    c.n_experts = experts_dist(rng);
    c.active_experts = 1 + rep % c.n_experts;
    c.ffn_width = 6;
    c.dropout = 0.0;
    c.router = rep % 3 == 0   ? RouterKind::attention
               : rep % 3 == 1 ? RouterKind::hmm
                              : RouterKind::classic;
    c.seed = 1000 + rep;
    GateTS model(c);
    Tensor x = random_tensor({3, c.context}, rng, false);
    NoGradGuard guard;
    RngCtx c1{false, 0, 0, 0}, c2{false, 0, 0, 0};
    Tensor sparse = model.forward(x, c1, false).forecast;
    Tensor dense = model.forward(x, c2, true).forecast;
    for (int64_t i = 0; i < sparse.size(); ++i) {
      worst = std::max(worst, std::abs(sparse.data()[i] - dense.data()[i]));
    }
  }
  std::ostringstream detail;
  detail << "max abs diff " << worst << " over 10 configs";
  return {worst < 1e-12, false, detail.str()};
}

// ---------------------------------------------------------------------------
// 5. Synthetic forecasting skill: sine convergence + regime majority vote.

struct TrainedEval {
  EvalReport report;
  double seconds;
  int64_t epochs_used;
};

TrainedEval train_and_evaluate(RouterKind router, uint64_t model_seed,
                               const PreparedSeries& prepared, int64_t d_model,
                               int64_t ffn, int64_t epochs,
                               int64_t eval_every = 0,
                               double stop_mase = 0.0) {
  GateTSConfig mc;
  mc.context = 24;
  mc.horizon = 4;
  mc.d_model = d_model;
  mc.n_heads = 2;
  mc.n_experts = 4;
  mc.active_experts = 2;
  mc.ffn_width = ffn;
  mc.dropout = 0.0;
  mc.router = router;
  mc.seed = model_seed;
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 128;
  tc.base_lr = 3e-3;
  tc.seed = model_seed;

  WindowDataset train = make_windows(prepared, Split::train, 24, 4);
  WindowDataset val = make_windows(prepared, Split::val, 24, 4);
  WindowDataset test = make_windows(prepared, Split::test, 24, 4);

  const auto start = std::chrono::steady_clock::now();
  GateTS model(mc);
  Trainer trainer(model, tc, train, val);
  TrainedEval out{};
  int64_t done = 0;
  while (done < epochs) {
    const int64_t next = eval_every > 0 ? std::min(done + eval_every, epochs)
                                        : epochs;
    trainer.run(nullptr, next);
    done = next;
    out.report = evaluate(model, test);
    if (stop_mase > 0.0 && out.report.mase.mean < stop_mase) break;
  }
  out.seconds = seconds_since(start);
  out.epochs_used = done;
  return out;
}

Outcome criterion_synthetic_skill() {
  std::ostringstream detail;

  // Noiseless sine, period 24, length 2000 (criterion-pinned data).
  PreparedSeries sine =
      prepare_series(synth_series(SynthKind::sine, 2000, 3), 1);
  WindowDataset sine_test = make_windows(sine, Split::test, 24, 4);
  const EvalReport naive = evaluate_naive(sine_test);

  TrainedEval gate = train_and_evaluate(RouterKind::attention, 7, sine, 16, 32,
                                        200, 10, 0.35);
  detail << "sine: GateTS MASE " << gate.report.mase.mean << " in "
         << gate.epochs_used << " epochs/" << gate.seconds << "s"
         << " (naive MAE " << naive.mae.mean << ", model MAE "
         << gate.report.mae.mean << ")";
  if (!(gate.report.mase.mean < 0.5)) {
    return {false, false, detail.str() + " — MASE >= 0.5"};
  }
  if (!(gate.seconds < 300.0)) {
    return {false, false, detail.str() + " — exceeded 5 minutes"};
  }
  if (!(gate.report.mae.mean < naive.mae.mean)) {
    return {false, false, detail.str() + " — did not beat naive MAE"};
  }

  // Harness parity: the classic-gate variant trained identically converges.
  TrainedEval classic = train_and_evaluate(RouterKind::classic, 7, sine, 16,
                                           32, 200, 10, 0.35);
  detail << "; classic MASE " << classic.report.mase.mean;
  if (!(classic.report.mase.mean < 0.5)) {
    return {false, false, detail.str() + " — classic variant di not converge"};
  }

  // Regime-switching synthetic: attention vs classic, 3 seeds, majority.
  PreparedSeries regime =
      prepare_series(synth_series(SynthKind::regime, 1600, 201), 1);
  int wins = 0;
  detail << "; regime (attn vs classic MAE):";
  for (uint64_t seed : {1, 2, 3}) {
    TrainedEval a = train_and_evaluate(RouterKind::attention, seed, regime, 8,
                                       8, 40);
    TrainedEval c = train_and_evaluate(RouterKind::classic, seed, regime, 8, 8,
                                       40);
    const bool win = a.report.mae.mean <= c.report.mae.mean;
    wins += win;
    detail << " s" << seed << " " << a.report.mae.mean
           << (win ? " <= " : " > ") << c.report.mae.mean;
  }
  detail << " — " << wins << "/3";
  return {wins >= 2, false, detail.str()};
}

// ---------------------------------------------------------------------------
// 6. Routing specialization on the intermittent synthetic: the trained
//    attention router must not collapse to a single expert set.
Outcome criterion_routing_specialization() {
  PreparedSeries prepared =
      prepare_series(synth_series(SynthKind::intermittent, 2000, 11), 1);
  TrainedEval run = train_and_evaluate(RouterKind::attention, 9, prepared, 16,
                                       32, 30);
  const Utilization& util = run.report.utilization;
  std::ostringstream detail;
  detail << "distinct expert sets " << util.distinct_sets << ", entropy "
         << util.entropy << ", utilization";
  for (double f : util.frequencies) detail << " " << f;
  return {util.distinct_sets >= 2 && util.entropy > 0.0, false, detail.str()};
}

// ---------------------------------------------------------------------------
// 7. Metric oracles: brute-force formula agreement to 1e-12, 1000 cases.
Outcome criterion_metric_oracles() {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> value(-10.0, 10.0);
  std::uniform_int_distribution<size_t> length(1, 24);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const size_t n = length(rng);
    std::vector<double> y(n), yhat(n);
    for (size_t i = 0; i < n; ++i) {
      y[i] = value(rng);
      yhat[i] = rng() % 7 == 0 ? 0.0 : value(rng);  // exercise zero terms
    }
    std::vector<double> train(2 + rng() % 30);
    for (double& v : train) v = value(rng);

    double abs_acc = 0.0, sq_acc = 0.0, sm_acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      abs_acc += std::abs(y[i] - yhat[i]);
      sq_acc += (y[i] - yhat[i]) * (y[i] - yhat[i]);
      const double denom = std::abs(y[i]) + std::abs(yhat[i]);
      if (denom > 0.0) sm_acc += 200.0 * std::abs(y[i] - yhat[i]) / denom;
    }
    const double nn = static_cast<double>(n);
    worst = std::max(worst, std::abs(mae(y, yhat) - abs_acc / nn));
    worst = std::max(worst, std::abs(rmse(y, yhat) - std::sqrt(sq_acc / nn)));
    worst = std::max(worst, std::abs(smape(y, yhat) - sm_acc / nn));
    double delta = 0.0;
    for (size_t i = 1; i < train.size(); ++i) {
      delta += std::abs(train[i] - train[i - 1]);
    }
    delta /= static_cast<double>(train.size() - 1);
    worst = std::max(worst,
                     std::abs(mase(y, yhat, train) - (abs_acc / nn) / delta));
  }

  // The naive forecast on a continuation window reproduces the hand formula
  // exactly (identical operation order).
  std::vector<double> train{3.0, 5.0, 4.0, 4.5, 6.0, 5.5};
  std::vector<double> continuation{5.0, 6.5, 6.0};
  const std::vector<double> repeat = naive_forecast(train, 3);
  double num = 0.0;
  for (size_t i = 0; i < continuation.size(); ++i) {
    num += std::abs(continuation[i] - repeat[i]);
  }
  num /= static_cast<double>(continuation.size());
  double den = 0.0;
  for (size_t i = 1; i < train.size(); ++i) {
    den += std::abs(train[i] - train[i - 1]);
  }
  den /= static_cast<double>(train.size() - 1);
  const bool exact = mase(continuation, repeat, train) == num / den;

  std::ostringstream detail;
  detail << "worst formula gap " << worst << ", naive MASE exact: "
         << (exact ? "yes" : "no");
  return {worst < 1e-12 && exact, false, detail.str()};
}

// ---------------------------------------------------------------------------
// 8. Parameter accounting: formula == enumeration on 20 random configs;
//    k=2,E=16 differs from total by exactly 14 expert blocks.
Outcome criterion_parameter_accounting() {
  std::mt19937_64 rng(888);
  std::uniform_int_distribution<int64_t> heads(1, 4);
  std::uniform_int_distribution<int64_t> mult(1, 6);
  std::uniform_int_distribution<int64_t> experts(1, 12);
  std::uniform_int_distribution<int64_t> span(1, 48);
  for (int rep = 0; rep < 20; ++rep) {
    GateTSConfig c;
    c.n_heads = heads(rng);
    c.d_model = c.n_heads * mult(rng) * 2;
    c.n_experts = experts(rng);
    c.active_experts = 1 + static_cast<int64_t>(rng() % c.n_experts);
    c.context = span(rng);
    c.horizon = span(rng);
    c.ffn_width = 4 * mult(rng);
    c.dropout = 0.0;
    c.router = rep % 3 == 0   ? RouterKind::attention
               : rep % 3 == 1 ? RouterKind::hmm
                              : RouterKind::classic;
    c.seed = rep;
    GateTS model(c);
    const ParameterCounts formula = GateTS::count_parameters(c);
    const ParameterCounts enumerated = model.enumerate_parameters();
    if (formula.total != enumerated.total ||
        formula.active != enumerated.active) {
      return {false, false,
              "config " + std::to_string(rep) + ": formula (" +
                  std::to_string(formula.total) + "," +
                  std::to_string(formula.active) + ") vs enumeration (" +
                  std::to_string(enumerated.total) + "," +
                  std::to_string(enumerated.active) + ")"};
    }
  }

  GateTSConfig paper_shape;  // defaults: d=48, heads=4, ffn=48, T=64, H=48
  paper_shape.n_experts = 16;
  paper_shape.active_experts = 2;
  const ParameterCounts counts = GateTS::count_parameters(paper_shape);
  const int64_t d = paper_shape.d_model, f = paper_shape.ffn_width;
  const int64_t expert_block =
      (4 * d * d + 4 * d) + 2 * d + (d * f + f) + (f * d + d) + 2 * d;
  const bool structural =
      counts.total - counts.active == 14 * expert_block &&
      counts.active < counts.total;
  std::ostringstream detail;
  detail << "20 configs exact; E=16,k=2: total " << counts.total << ", active "
         << counts.active << ", gap = 14 x " << expert_block;
  return {structural, false, detail.str()};
}

// ---------------------------------------------------------------------------
// 9. Optional extended: sunspot long-term run, gated on the dataset being
//    present (GATETS_SUNSPOT_CSV).
Outcome criterion_sunspot_extended() {
  const char* path = std::getenv("GATETS_SUNSPOT_CSV");
  if (!path || !*path) {
    return {true, true,
            "optional; set GATETS_SUNSPOT_CSV=<daily sunspot csv> to run "
            "(T=64 H=48 E=16 k=2, budget ~2h)"};
  }
  RawSeries raw = load_series(path, SeriesFormat::csv);
  PreparedSeries prepared = prepare_series(raw, 1);
  GateTSConfig mc;  // shipped defaults: T=64 H=48 d=48 heads=4 E=16 k=2
  mc.dropout = 0.1;
  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 256;
  WindowDataset train = make_windows(prepared, Split::train, mc.context,
                                     mc.horizon);
  WindowDataset val = make_windows(prepared, Split::val, mc.context,
                                   mc.horizon);
  WindowDataset test = make_windows(prepared, Split::test, mc.context,
                                    mc.horizon);
  GateTS model(mc);
  Trainer trainer(model, tc, train, val);
  trainer.run();
  GateTS best = model_from_checkpoint(trainer.best());
  EvalReport report = evaluate(best, test);
  std::ostringstream detail;
  detail << "test MASE " << report.mase.mean << " (threshold 0.6)";
  return {report.mase.mean < 0.6, false, detail.str()};
}

// ---------------------------------------------------------------------------
// 10. Determinism & persistence.
Outcome criterion_determinism() {
  PreparedSeries prepared =
      prepare_series(synth_series(SynthKind::sine, 600, 5), 1);
  WindowDataset train = make_windows(prepared, Split::train, 24, 4);
  WindowDataset val = make_windows(prepared, Split::val, 24, 4);
  GateTSConfig mc;
  mc.context = 24;
  mc.horizon = 4;
  mc.d_model = 8;
  mc.n_heads = 2;
  mc.n_experts = 3;
  mc.active_experts = 2;
  mc.ffn_width = 8;
  mc.dropout = 0.1;  // exercise the stochastic path too
  mc.seed = 13;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 64;
  tc.seed = 13;

  std::vector<double> curve_a, curve_b;
  for (std::vector<double>* curve : {&curve_a, &curve_b}) {
    GateTS model(mc);
    Trainer trainer(model, tc, train, val);
    for (const EpochStats& s : trainer.run().history) {
      curve->push_back(s.train_loss);
      curve->push_back(s.val_loss);
    }
  }
  if (curve_a != curve_b) {
    return {false, false, "fixed-seed loss curves differ"};
  }

  // Checkpoint byte round trip + forward-pass exactness.
  GateTS model(mc);
  Trainer trainer(model, tc, train, val);
  trainer.run();
  const std::string p1 = "/tmp/gatets_acceptance_a.gtsc";
  const std::string p2 = "/tmp/gatets_acceptance_b.gtsc";
  save_checkpoint(trainer.snapshot(), p1);
  save_checkpoint(load_checkpoint(p1), p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  if (s1.str() != s2.str() || s1.str().empty()) {
    return {false, false, "checkpoint save/load/save is not byte-identical"};
  }

  GateTS reloaded = model_from_checkpoint(load_checkpoint(p1));
  Tensor x = Tensor::zeros({2, 24});
  for (int64_t i = 0; i < x.size(); ++i) {
    x.data()[i] = std::sin(0.21 * static_cast<double>(i));
  }
  RngCtx c1{false, 0, 0, 0}, c2{false, 0, 0, 0};
  Tensor before = model.forward(x, c1).forecast;
  Tensor after = reloaded.forward(x, c2).forecast;
  for (int64_t i = 0; i < before.size(); ++i) {
    if (before.data()[i] != after.data()[i]) {
      return {false, false, "reloaded forward pass differs bitwise"};
    }
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
  return {true, false,
          "loss curves bitwise equal; checkpoint byte-identical and "
          "forward-exact"};
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> criteria{
      {1, "gradient integrity", criterion_gradient_integrity},
      {2, "routing exactness", criterion_routing_exactness},
      {3, "gate route equivalence", criterion_gate_equivalence},
      {4, "sparse == dense evaluation", criterion_sparse_equals_dense},
      {5, "synthetic forecasting skill", criterion_synthetic_skill},
      {6, "routing specialization", criterion_routing_specialization},
      {7, "metric oracles", criterion_metric_oracles},
      {8, "parameter accounting", criterion_parameter_accounting},
      {9, "sunspot long-term run (optional)", criterion_sunspot_extended},
      {10, "determinism & persistence", criterion_determinism},
  };

  bool all_ok = true;
  for (const Entry& entry : criteria) {
    Outcome outcome;
    try {
      outcome = entry.run();
    } catch (const std::exception& e) {
      outcome = {false, false, std::string("exception: ") + e.what()};
    }
    const char* tag = outcome.skipped ? "[SKIP]"
                      : outcome.passed ? "[PASS]"
                                       : "[FAIL]";
    std::cout << tag << " criterion " << entry.id << ": " << entry.name
              << " — " << outcome.detail << "\n"
              << std::flush;
    if (!outcome.passed && !outcome.skipped) all_ok = false;
  }
  std::cout << (all_ok ? "acceptance: all criteria passed"
                       : "acceptance: FAILURES present")
            << "\n";
  return all_ok ? 0 : 1;
}
