#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gatets/gating.hpp"
#include "gatets/nn.hpp"
#include "gatets/tensor.hpp"

namespace gatets {

struct GateTSConfig {
  int64_t context = 64;  // T
  int64_t horizon = 48;  // H
  int64_t d_model = 48;
  int64_t n_heads = 4;
  int64_t n_experts = 16;
  int64_t active_experts = 2;  // k
  int64_t ffn_width = 48;
  double dropout = 0.1;
  RouterKind router = RouterKind::attention;
  uint64_t seed = 42;

  void validate() const;
};

struct ParameterCounts {
  int64_t total = 0;
  int64_t active = 0;
};

// One transformer encoder block per expert: attention and feed-forward
// sub-layers with residual connections and post-norm.
struct ExpertParams {
  MhsaParams attn;
  Tensor ln1_gamma, ln1_beta;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Tensor ln2_gamma, ln2_beta;

  static ExpertParams init(int64_t d, int64_t ffn_width, std::mt19937_64& rng);
  std::vector<Tensor*> tensors();
};

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct ModelForward {
  Tensor forecast;  // [B,H], normalized space
  RoutingDecision routing;
};

class GateTS {
 public:
  explicit GateTS(GateTSConfig config);

  const GateTSConfig& config() const { return config_; }

  // Fixed enumeration order; also the checkpoint order.
  std::vector<NamedParam> named_parameters();
  std::vector<Tensor> parameters();

  Tensor embed_inputs(const Tensor& x) const;
  Tensor prepare_block(const Tensor& h, const RngCtx& ctx) const;
  Tensor gate_scores(const Tensor& h) const;
  Tensor expert_forward(const Tensor& h, int64_t e, const RngCtx& ctx) const;

  // Weighted per-token sum of dense expert outputs (one [B,T,d] tensor per
  // expert), followed by dropout and the combination layer norm.
  Tensor combine_experts(const std::vector<Tensor>& expert_outputs,
                         const RoutingDecision& decision,
                         const RngCtx& ctx) const;

  Tensor forecast_head(const Tensor& h) const;

  // Full pipeline. dense_eval computes every expert on every row instead of
  // gathering routed rows; the two must agree elementwise.
  ModelForward forward(const Tensor& x, const RngCtx& ctx,
                       bool dense_eval = false) const;

  static ParameterCounts count_parameters(const GateTSConfig& config);
  ParameterCounts enumerate_parameters();

  // Test hook: per-expert parameter tying (copies expert 0 into all others).
  void tie_expert_parameters();

  struct Params {
    Tensor input_w, input_b;
    Tensor pos_embedding;
    MhsaParams prepare_attn;
    Tensor prepare_ln_gamma, prepare_ln_beta;
    AttentionGateParams attention_gate;
    HmmGateParams hmm_gate;
    ClassicGateParams classic_gate;
    std::vector<ExpertParams> experts;
    Tensor combine_ln_gamma, combine_ln_beta;
    Tensor head_w, head_b;
  };
  Params& params() { return params_; }

 private:
  GateTSConfig config_;
  Params params_;
};

// Repeats the last observed value over the horizon.
std::vector<double> naive_forecast(std::span<const double> context,
                                   int64_t horizon);

// Univariate LSTM baseline sharing the forecasting interface.
class LstmBaseline {
 public:
  LstmBaseline(int64_t context, int64_t horizon, int64_t hidden,
               uint64_t seed);
  Tensor forward(const Tensor& x) const;  // [B,T] -> [B,H]
  std::vector<NamedParam> named_parameters();
  int64_t parameter_count();
  int64_t hidden_size() const { return hidden_; }

 private:
  int64_t context_, horizon_, hidden_;
  LstmParams params_;
};

}  // namespace gatets
