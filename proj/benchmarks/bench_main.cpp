#include <benchmark/benchmark.h>

#include <random>

#include "gatets/gating.hpp"
#include "gatets/model.hpp"
#include "gatets/optim.hpp"
#include "gatets/trainer.hpp"

using namespace gatets;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng,
                     bool requires_grad = false) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  return t;
}

GateTSConfig bench_config(RouterKind router) {
  GateTSConfig c;
  c.context = 64;
  c.horizon = 48;
  c.d_model = 48;
  c.n_heads = 4;
  c.n_experts = 16;
  c.active_experts = 2;
  c.ffn_width = 48;
  c.dropout = 0.0;
  c.router = router;
  c.seed = 1;
  return c;
}

}  // namespace

static void BM_GateScores(benchmark::State& state, RouterKind kind) {
  std::mt19937_64 rng(7);
  const int64_t d = 48, experts = 16;
  Tensor x = random_tensor({8, 64, d}, rng);
  AttentionGateParams ap = AttentionGateParams::init(d, experts, rng);
  HmmGateParams hp = HmmGateParams::init(d, experts, rng);
  ClassicGateParams cp = ClassicGateParams::init(d, experts, rng);
  NoGradGuard guard;
  for (auto _ : state) {
    Tensor s = kind == RouterKind::attention ? attention_gate_scores(x, ap)
               : kind == RouterKind::hmm     ? hmm_gate_scores(x, hp)
                                             : classic_gate_scores(x, cp);
    benchmark::DoNotOptimize(s.data());
  }
}
BENCHMARK_CAPTURE(BM_GateScores, attention, RouterKind::attention);
BENCHMARK_CAPTURE(BM_GateScores, hmm, RouterKind::hmm);
BENCHMARK_CAPTURE(BM_GateScores, classic, RouterKind::classic);

static void BM_TopkRenormalize(benchmark::State& state) {
  std::mt19937_64 rng(11);
  Tensor probs = softmax(random_tensor({8, 64, 16}, rng));
  const int64_t k = state.range(0);
  for (auto _ : state) {
    RoutingDecision d = topk_renormalize(probs, k);
    benchmark::DoNotOptimize(d.weights.data());
  }
}
BENCHMARK(BM_TopkRenormalize)->Arg(1)->Arg(2)->Arg(8);

static void BM_ModelForward(benchmark::State& state, bool dense) {
  GateTS model(bench_config(RouterKind::attention));
  std::mt19937_64 rng(13);
  Tensor x = random_tensor({8, 64}, rng);
  NoGradGuard guard;
  for (auto _ : state) {
    RngCtx ctx{false, 0, 0, 0};
    ModelForward out = model.forward(x, ctx, dense);
    benchmark::DoNotOptimize(out.forecast.data());
  }
}
BENCHMARK_CAPTURE(BM_ModelForward, sparse_top2, false);
BENCHMARK_CAPTURE(BM_ModelForward, dense_all_experts, true);

static void BM_TrainStep(benchmark::State& state) {
  GateTSConfig mc = bench_config(RouterKind::attention);
  mc.context = 24;
  mc.horizon = 4;
  mc.d_model = 16;
  mc.n_heads = 2;
  mc.ffn_width = 32;
  mc.n_experts = 4;
  GateTS model(mc);
  AdamW opt(model.parameters(), AdamWHyper{});
  std::mt19937_64 rng(17);
  Tensor x = random_tensor({128, 24}, rng);
  Tensor y = random_tensor({128, 4}, rng);
  uint64_t step = 0;
  for (auto _ : state) {
    RngCtx ctx{true, 1, step++, 0};
    Tensor loss = mse_loss(model.forward(x, ctx).forecast, y);
    opt.zero_grad();
    loss.backward();
    opt.step(1e-3);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

static void BM_AdamWStep(benchmark::State& state) {
  std::mt19937_64 rng(19);
  std::vector<Tensor> params;
  for (int i = 0; i < 8; ++i) {
    Tensor p = random_tensor({256, 64}, rng, true);
    p.ensure_grad();
    for (int64_t j = 0; j < p.size(); ++j) p.grad()[j] = 0.01;
    params.push_back(p);
  }
  AdamW opt(params, AdamWHyper{});
  for (auto _ : state) {
    opt.step(1e-3);
  }
}
BENCHMARK(BM_AdamWStep);

BENCHMARK_MAIN();
