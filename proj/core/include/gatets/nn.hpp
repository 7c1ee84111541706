#pragma once

#include <random>
#include <vector>

#include "gatets/tensor.hpp"

namespace gatets {

struct MhsaParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;

  static MhsaParams init(int64_t d_model, std::mt19937_64& rng);
  std::vector<Tensor*> tensors();
};

// Scaled dot-product attention over the full window (no causal mask), with
// per-head splitting and a trailing output projection.
Tensor multi_head_self_attention(const Tensor& x, const MhsaParams& params,
                                 int64_t n_heads);

struct LstmParams {
  // One weight/bias triple per gate: input, forget, cell, output.
  Tensor wx_i, wh_i, b_i;
  Tensor wx_f, wh_f, b_f;
  Tensor wx_g, wh_g, b_g;
  Tensor wx_o, wh_o, b_o;
  Tensor head_w, head_b;

  static LstmParams init(int64_t input_dim, int64_t hidden, int64_t horizon,
                         std::mt19937_64& rng);
  std::vector<Tensor*> tensors();
  int64_t parameter_count();
};

// Single-layer LSTM over [B,T,1]; the final hidden state feeds an affine
// head producing [B,H].
Tensor lstm_forward(const Tensor& x, const LstmParams& params, int64_t hidden);

// Affine maps draw from uniform(-1/sqrt(fan_in), +1/sqrt(fan_in));
// embedding-style tables use normal(0, 0.02).
void init_affine_uniform(Tensor& t, int64_t fan_in, std::mt19937_64& rng);
void init_normal(Tensor& t, double stddev, std::mt19937_64& rng);

}  // namespace gatets
