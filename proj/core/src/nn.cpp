#include "gatets/nn.hpp"

#include <cmath>

namespace gatets {

void init_affine_uniform(Tensor& t, int64_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
}

void init_normal(Tensor& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
}

MhsaParams MhsaParams::init(int64_t d, std::mt19937_64& rng) {
  MhsaParams p;
  for (Tensor* w : {&p.wq, &p.wk, &p.wv, &p.wo}) {
    *w = Tensor::zeros({d, d}, true);
    init_affine_uniform(*w, d, rng);
  }
  for (Tensor* b : {&p.bq, &p.bk, &p.bv, &p.bo}) {
    *b = Tensor::zeros({d}, true);
    init_affine_uniform(*b, d, rng);
  }
  return p;
}

std::vector<Tensor*> MhsaParams::tensors() {
  return {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo};
}

Tensor multi_head_self_attention(const Tensor& x, const MhsaParams& p,
                                 int64_t n_heads) {
  if (x.ndim() != 3) {
    throw ShapeError("multi_head_self_attention: expects [B,T,d], got " +
                     shape_str(x.shape()));
  }
  const int64_t d = x.dim(2);
  if (d % n_heads != 0) {
    throw ConfigError("multi_head_self_attention: d_model=" +
                      std::to_string(d) + " not divisible by n_heads=" +
                      std::to_string(n_heads));
  }
  const int64_t hd = d / n_heads;
  Tensor q = split_heads(linear(x, p.wq, p.bq), n_heads);
  Tensor k = split_heads(linear(x, p.wk, p.bk), n_heads);
  Tensor v = split_heads(linear(x, p.wv, p.bv), n_heads);
  Tensor scores =
      scale(bmm(q, transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(hd)));
  Tensor attn = softmax(scores, -1);
  Tensor ctx = merge_heads(bmm(attn, v), n_heads);
  return linear(ctx, p.wo, p.bo);
}

LstmParams LstmParams::init(int64_t input_dim, int64_t hidden, int64_t horizon,
                            std::mt19937_64& rng) {
  LstmParams p;
  const int64_t fan = input_dim + hidden;
  for (Tensor* w : {&p.wx_i, &p.wx_f, &p.wx_g, &p.wx_o}) {
    *w = Tensor::zeros({input_dim, hidden}, true);
    init_affine_uniform(*w, fan, rng);
  }
  for (Tensor* w : {&p.wh_i, &p.wh_f, &p.wh_g, &p.wh_o}) {
    *w = Tensor::zeros({hidden, hidden}, true);
    init_affine_uniform(*w, fan, rng);
  }
  for (Tensor* b : {&p.b_i, &p.b_g, &p.b_o}) {
    *b = Tensor::zeros({hidden}, true);
    init_affine_uniform(*b, fan, rng);
  }
  // Forget gate starts open so long-range signal survives early training.
  p.b_f = Tensor::full({hidden}, 1.0, true);
  p.head_w = Tensor::zeros({hidden, horizon}, true);
  init_affine_uniform(p.head_w, hidden, rng);
  p.head_b = Tensor::zeros({horizon}, true);
  init_affine_uniform(p.head_b, hidden, rng);
  return p;
}

std::vector<Tensor*> LstmParams::tensors() {
  return {&wx_i, &wh_i, &b_i, &wx_f, &wh_f, &b_f, &wx_g, &wh_g,
          &b_g,  &wx_o, &wh_o, &b_o,  &head_w, &head_b};
}

int64_t LstmParams::parameter_count() {
  int64_t n = 0;
  for (Tensor* t : tensors()) n += t->size();
  return n;
}

Tensor lstm_forward(const Tensor& x, const LstmParams& p, int64_t hidden) {
  if (x.ndim() != 3) {
    throw ShapeError("lstm_forward: expects [B,T,in], got " +
                     shape_str(x.shape()));
  }
  if (hidden < 1) throw ConfigError("lstm_forward: hidden_size must be >= 1");
  const int64_t batch = x.dim(0);
  const int64_t steps = x.dim(1);
  Tensor h = Tensor::zeros({batch, hidden});
  Tensor c = Tensor::zeros({batch, hidden});
  for (int64_t t = 0; t < steps; ++t) {
    Tensor xt = slice_time(x, t);
    Tensor gi = sigmoid(add(add(matmul(xt, p.wx_i), matmul(h, p.wh_i)), p.b_i));
    Tensor gf = sigmoid(add(add(matmul(xt, p.wx_f), matmul(h, p.wh_f)), p.b_f));
    Tensor gg = tanh_op(add(add(matmul(xt, p.wx_g), matmul(h, p.wh_g)), p.b_g));
    Tensor go = sigmoid(add(add(matmul(xt, p.wx_o), matmul(h, p.wh_o)), p.b_o));
    c = add(mul(gf, c), mul(gi, gg));
    h = mul(go, tanh_op(c));
  }
  return linear(h, p.head_w, p.head_b);
}

}  // namespace gatets
