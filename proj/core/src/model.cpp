#include "gatets/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace gatets {

void GateTSConfig::validate() const {
  if (context < 1 || horizon < 1) {
    throw ConfigError("config: context and horizon must be >= 1");
  }
  if (n_experts < 1 || active_experts < 1 || active_experts > n_experts) {
    throw ConfigError("config: need 1 <= active_experts <= n_experts, got k=" +
                      std::to_string(active_experts) + " E=" +
                      std::to_string(n_experts));
  }
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
    throw ConfigError("config: d_model=" + std::to_string(d_model) +
                      " must be positive and divisible by n_heads=" +
                      std::to_string(n_heads));
  }
  if (ffn_width < 1) throw ConfigError("config: ffn_width must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("config: dropout must lie in [0,1)");
  }
}

ExpertParams ExpertParams::init(int64_t d, int64_t ffn_width,
                                std::mt19937_64& rng) {
  ExpertParams e;
  e.attn = MhsaParams::init(d, rng);
  e.ln1_gamma = Tensor::full({d}, 1.0, true);
  e.ln1_beta = Tensor::zeros({d}, true);
  e.ffn_w1 = Tensor::zeros({d, ffn_width}, true);
  init_affine_uniform(e.ffn_w1, d, rng);
  e.ffn_b1 = Tensor::zeros({ffn_width}, true);
  init_affine_uniform(e.ffn_b1, d, rng);
  e.ffn_w2 = Tensor::zeros({ffn_width, d}, true);
  init_affine_uniform(e.ffn_w2, ffn_width, rng);
  e.ffn_b2 = Tensor::zeros({d}, true);
  init_affine_uniform(e.ffn_b2, ffn_width, rng);
  e.ln2_gamma = Tensor::full({d}, 1.0, true);
  e.ln2_beta = Tensor::zeros({d}, true);
  return e;
}

std::vector<Tensor*> ExpertParams::tensors() {
  std::vector<Tensor*> out = attn.tensors();
  for (Tensor* t : {&ln1_gamma, &ln1_beta, &ffn_w1, &ffn_b1, &ffn_w2, &ffn_b2,
                    &ln2_gamma, &ln2_beta}) {
    out.push_back(t);
  }
  return out;
}

GateTS::GateTS(GateTSConfig config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const int64_t d = config_.d_model;

  params_.input_w = Tensor::zeros({1, d}, true);
  init_affine_uniform(params_.input_w, 1, rng);
  params_.input_b = Tensor::zeros({d}, true);
  init_affine_uniform(params_.input_b, 1, rng);
  params_.pos_embedding = Tensor::zeros({config_.context, d}, true);
  init_normal(params_.pos_embedding, 0.02, rng);

  params_.prepare_attn = MhsaParams::init(d, rng);
  params_.prepare_ln_gamma = Tensor::full({d}, 1.0, true);
  params_.prepare_ln_beta = Tensor::zeros({d}, true);

  switch (config_.router) {
    case RouterKind::attention:
      params_.attention_gate =
          AttentionGateParams::init(d, config_.n_experts, rng);
      break;
    case RouterKind::hmm:
      params_.hmm_gate = HmmGateParams::init(d, config_.n_experts, rng);
      break;
    case RouterKind::classic:
      params_.classic_gate =
          ClassicGateParams::init(d, config_.n_experts, rng);
      break;
  }

  params_.experts.reserve(config_.n_experts);
  for (int64_t e = 0; e < config_.n_experts; ++e) {
    params_.experts.push_back(ExpertParams::init(d, config_.ffn_width, rng));
  }

  params_.combine_ln_gamma = Tensor::full({d}, 1.0, true);
  params_.combine_ln_beta = Tensor::zeros({d}, true);
  params_.head_w = Tensor::zeros({d, config_.horizon}, true);
  init_affine_uniform(params_.head_w, d, rng);
  params_.head_b = Tensor::zeros({config_.horizon}, true);
  init_affine_uniform(params_.head_b, d, rng);
}

std::vector<NamedParam> GateTS::named_parameters() {
  std::vector<NamedParam> out;
  auto push = [&out](const std::string& name, Tensor& t) {
    out.push_back({name, t});
  };
  push("input.w", params_.input_w);
  push("input.b", params_.input_b);
  push("pos_embedding", params_.pos_embedding);
  const char* attn_names[] = {"wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"};
  {
    auto ts = params_.prepare_attn.tensors();
    for (size_t i = 0; i < ts.size(); ++i) {
      push(std::string("prepare.attn.") + attn_names[i], *ts[i]);
    }
  }
  push("prepare.ln.gamma", params_.prepare_ln_gamma);
  push("prepare.ln.beta", params_.prepare_ln_beta);
  switch (config_.router) {
    case RouterKind::attention: {
      auto ts = params_.attention_gate.tensors();
      const char* names[] = {"w_k", "b_k", "w_q", "b_q", "w_e"};
      for (size_t i = 0; i < ts.size(); ++i) {
        push(std::string("router.") + names[i], *ts[i]);
      }
      break;
    }
    case RouterKind::hmm: {
      auto ts = params_.hmm_gate.tensors();
      const char* names[] = {"w", "q", "m"};
      for (size_t i = 0; i < ts.size(); ++i) {
        push(std::string("router.") + names[i], *ts[i]);
      }
      break;
    }
    case RouterKind::classic: {
      auto ts = params_.classic_gate.tensors();
      const char* names[] = {"w_g", "b_g"};
      for (size_t i = 0; i < ts.size(); ++i) {
        push(std::string("router.") + names[i], *ts[i]);
      }
      break;
    }
  }
  const char* expert_names[] = {"attn.wq", "attn.bq", "attn.wk", "attn.bk",
                                "attn.wv", "attn.bv", "attn.wo", "attn.bo",
                                "ln1.gamma", "ln1.beta", "ffn.w1", "ffn.b1",
                                "ffn.w2", "ffn.b2", "ln2.gamma", "ln2.beta"};
  for (int64_t e = 0; e < config_.n_experts; ++e) {
    auto ts = params_.experts[e].tensors();
    for (size_t i = 0; i < ts.size(); ++i) {
      push("expert" + std::to_string(e) + "." + expert_names[i], *ts[i]);
    }
  }
  push("combine.ln.gamma", params_.combine_ln_gamma);
  push("combine.ln.beta", params_.combine_ln_beta);
  push("head.w", params_.head_w);
  push("head.b", params_.head_b);
  return out;
}

std::vector<Tensor> GateTS::parameters() {
  std::vector<Tensor> out;
  for (NamedParam& np : named_parameters()) out.push_back(np.tensor);
  return out;
}

Tensor GateTS::embed_inputs(const Tensor& x) const {
  if (x.ndim() != 2 || x.dim(1) != config_.context) {
    throw ShapeError("embed_inputs: expected [B," +
                     std::to_string(config_.context) + "], got " +
                     shape_str(x.shape()));
  }
  const int64_t batch = x.dim(0);
  Tensor tokens = reshape(x, {batch * config_.context, 1});
  Tensor projected = linear(tokens, params_.input_w, params_.input_b);
  Tensor h = reshape(projected, {batch, config_.context, config_.d_model});
  return add(h, params_.pos_embedding);
}

Tensor GateTS::prepare_block(const Tensor& h, const RngCtx& ctx) const {
  Tensor a = multi_head_self_attention(h, params_.prepare_attn,
                                       config_.n_heads);
  a = dropout(a, config_.dropout, ctx);
  return layer_norm(add(h, a), params_.prepare_ln_gamma,
                    params_.prepare_ln_beta);
}

Tensor GateTS::gate_scores(const Tensor& h) const {
  switch (config_.router) {
    case RouterKind::attention:
      return attention_gate_scores(h, params_.attention_gate);
    case RouterKind::hmm:
      return hmm_gate_scores(h, params_.hmm_gate);
    case RouterKind::classic:
      return classic_gate_scores(h, params_.classic_gate);
  }
  throw ConfigError("gate_scores: unreachable router kind");
}

Tensor GateTS::expert_forward(const Tensor& h, int64_t e,
                              const RngCtx& ctx) const {
  if (e < 0 || e >= config_.n_experts) {
    throw ConfigError("expert_forward: index " + std::to_string(e) +
                      " out of range for E=" + std::to_string(config_.n_experts));
  }
  const ExpertParams& p = params_.experts[e];
  Tensor a = multi_head_self_attention(h, p.attn, config_.n_heads);
  a = dropout(a, config_.dropout, ctx);
  Tensor u = layer_norm(add(h, a), p.ln1_gamma, p.ln1_beta);
  Tensor f = linear(relu(linear(u, p.ffn_w1, p.ffn_b1)), p.ffn_w2, p.ffn_b2);
  f = dropout(f, config_.dropout, ctx);
  return layer_norm(add(u, f), p.ln2_gamma, p.ln2_beta);
}

Tensor GateTS::forecast_head(const Tensor& h) const {
  return linear(slice_time(h, h.dim(1) - 1), params_.head_w, params_.head_b);
}

namespace {

// out[b,t,:] = sum_e weights[b,t,e] * expert_out_e[row_of(b),t,:], with each
// expert evaluated only on the batch rows listed for it.
Tensor combine_weighted(const std::vector<Tensor>& outs,
                        const std::vector<std::vector<int64_t>>& rows,
                        const std::vector<int>& expert_ids,
                        const Tensor& weights, int64_t batch, int64_t steps,
                        int64_t width) {
  const int64_t experts = weights.shape().back();
  bool rg = grad_enabled() && weights.requires_grad();
  for (const Tensor& t : outs) rg = rg || (grad_enabled() && t.requires_grad());
  Tensor out = Tensor::zeros({batch, steps, width}, rg);
  const double* wv = weights.data();
  double* ov = out.data();
  for (size_t i = 0; i < outs.size(); ++i) {
    const int e = expert_ids[i];
    const double* yv = outs[i].data();
    for (size_t pos = 0; pos < rows[i].size(); ++pos) {
      const int64_t b = rows[i][pos];
      for (int64_t t = 0; t < steps; ++t) {
        const double w = wv[(b * steps + t) * experts + e];
        if (w == 0.0) continue;
        const double* src = yv + (pos * steps + t) * width;
        double* dst = ov + (b * steps + t) * width;
        for (int64_t c = 0; c < width; ++c) dst[c] += w * src[c];
      }
    }
  }
  if (out.requires_grad()) {
    auto node = std::make_shared<GradNode>();
    node->parents = outs;
    node->parents.push_back(weights);
    Tensor weights_c = weights, out_c = out;
    std::vector<Tensor> outs_c = outs;
    auto rows_c = std::make_shared<std::vector<std::vector<int64_t>>>(rows);
    auto ids_c = std::make_shared<std::vector<int>>(expert_ids);
    node->backward = [outs_c, rows_c, ids_c, weights_c, out_c, steps, width,
                      experts]() mutable {
      const double* g = out_c.grad();
      const double* wv = weights_c.data();
      const bool want_w = weights_c.requires_grad();
      if (want_w) weights_c.ensure_grad();
      for (size_t i = 0; i < outs_c.size(); ++i) {
        const int e = (*ids_c)[i];
        Tensor& y = outs_c[i];
        const bool want_y = y.requires_grad();
        if (want_y) y.ensure_grad();
        for (size_t pos = 0; pos < (*rows_c)[i].size(); ++pos) {
          const int64_t b = (*rows_c)[i][pos];
          for (int64_t t = 0; t < steps; ++t) {
            const size_t w_at = (b * steps + t) * experts + e;
            const double* gr = g + (b * steps + t) * width;
            const double* yr = y.data() + (pos * steps + t) * width;
            if (want_y) {
              double* gy = y.grad() + (pos * steps + t) * width;
              const double w = wv[w_at];
              if (w != 0.0) {
                for (int64_t c = 0; c < width; ++c) gy[c] += w * gr[c];
              }
            }
            if (want_w) {
              double acc = 0.0;
              for (int64_t c = 0; c < width; ++c) acc += gr[c] * yr[c];
              weights_c.grad()[w_at] += acc;
            }
          }
        }
      }
    };
    out.node() = std::move(node);
  }
  return out;
}

}  // namespace

Tensor GateTS::combine_experts(const std::vector<Tensor>& expert_outputs,
                               const RoutingDecision& decision,
                               const RngCtx& ctx) const {
  if (static_cast<int64_t>(expert_outputs.size()) != config_.n_experts) {
    throw ShapeError("combine_experts: expected " +
                     std::to_string(config_.n_experts) + " expert outputs, got " +
                     std::to_string(expert_outputs.size()));
  }
  const int64_t batch = expert_outputs[0].dim(0);
  const int64_t steps = expert_outputs[0].dim(1);
  std::vector<std::vector<int64_t>> rows(expert_outputs.size());
  std::vector<int> ids(expert_outputs.size());
  for (size_t e = 0; e < expert_outputs.size(); ++e) {
    rows[e].resize(batch);
    std::iota(rows[e].begin(), rows[e].end(), 0);
    ids[e] = static_cast<int>(e);
  }
  Tensor combined = combine_weighted(expert_outputs, rows, ids,
                                     decision.weights, batch, steps,
                                     config_.d_model);
  combined = dropout(combined, config_.dropout, ctx);
  return layer_norm(combined, params_.combine_ln_gamma,
                    params_.combine_ln_beta);
}

ModelForward GateTS::forward(const Tensor& x, const RngCtx& ctx,
                             bool dense_eval) const {
  if (!all_finite(x)) {
    throw NumericError("model forward: non-finite input");
  }
  const int64_t batch = x.dim(0);
  const int64_t steps = config_.context;
  const int64_t experts = config_.n_experts;

  Tensor h = prepare_block(embed_inputs(x), ctx);
  Tensor probs = gate_probabilities(gate_scores(h));
  RoutingDecision decision = topk_renormalize(probs, config_.active_experts);

  // Batch rows an expert must process: any row where some token routed to it.
  std::vector<std::vector<int64_t>> rows(experts);
  if (dense_eval) {
    for (int64_t e = 0; e < experts; ++e) {
      rows[e].resize(batch);
      std::iota(rows[e].begin(), rows[e].end(), 0);
    }
  } else {
    for (int64_t b = 0; b < batch; ++b) {
      std::vector<uint8_t> used(experts, 0);
      for (int64_t t = 0; t < steps; ++t) {
        for (int64_t j = 0; j < decision.k; ++j) {
          used[decision.selected[(b * steps + t) * decision.k + j]] = 1;
        }
      }
      for (int64_t e = 0; e < experts; ++e) {
        if (used[e]) rows[e].push_back(b);
      }
    }
  }

  std::vector<Tensor> expert_outs;
  std::vector<std::vector<int64_t>> expert_rows;
  std::vector<int> expert_ids;
  for (int64_t e = 0; e < experts; ++e) {
    if (rows[e].empty()) continue;
    const bool full = static_cast<int64_t>(rows[e].size()) == batch;
    Tensor input = full ? h : row_gather(h, rows[e]);
    expert_outs.push_back(expert_forward(input, e, ctx));
    expert_rows.push_back(std::move(rows[e]));
    expert_ids.push_back(static_cast<int>(e));
  }

  Tensor combined = combine_weighted(expert_outs, expert_rows, expert_ids,
                                     decision.weights, batch, steps,
                                     config_.d_model);
  combined = dropout(combined, config_.dropout, ctx);
  Tensor hc = layer_norm(combined, params_.combine_ln_gamma,
                         params_.combine_ln_beta);
  return {forecast_head(hc), std::move(decision)};
}

ParameterCounts GateTS::count_parameters(const GateTSConfig& config) {
  config.validate();
  const int64_t d = config.d_model;
  const int64_t f = config.ffn_width;
  const int64_t attn = 4 * d * d + 4 * d;
  const int64_t expert = attn + 2 * d + (d * f + f) + (f * d + d) + 2 * d;
  int64_t router = 0;
  switch (config.router) {
    case RouterKind::attention:
      router = (d * d + d) + d * config.n_experts + d +
               d * d * config.n_experts;
      break;
    case RouterKind::hmm:
      router = d * d + d * config.n_experts + config.n_experts;
      break;
    case RouterKind::classic:
      router = d * config.n_experts + config.n_experts;
      break;
  }
  const int64_t shared = (d + d)                      // input projection
                         + config.context * d        // positional table
                         + attn + 2 * d              // prepare block
                         + router + 2 * d            // combination norm
                         + (d * config.horizon + config.horizon);
  ParameterCounts counts;
  counts.total = shared + config.n_experts * expert;
  counts.active = shared + config.active_experts * expert;
  return counts;
}

ParameterCounts GateTS::enumerate_parameters() {
  ParameterCounts counts;
  int64_t expert_total = 0;
  int64_t first_expert = -1;
  for (NamedParam& np : named_parameters()) {
    counts.total += np.tensor.size();
    if (np.name.rfind("expert", 0) == 0) {
      expert_total += np.tensor.size();
      if (first_expert < 0) first_expert = 0;
    }
  }
  const int64_t per_expert = expert_total / config_.n_experts;
  counts.active = counts.total - expert_total +
                  config_.active_experts * per_expert;
  return counts;
}

void GateTS::tie_expert_parameters() {
  for (int64_t e = 1; e < config_.n_experts; ++e) {
    auto src = params_.experts[0].tensors();
    auto dst = params_.experts[e].tensors();
    for (size_t i = 0; i < src.size(); ++i) {
      dst[i]->values() = src[i]->values();
    }
  }
}

std::vector<double> naive_forecast(std::span<const double> context,
                                   int64_t horizon) {
  if (context.empty()) {
    throw DataError("naive_forecast: empty context");
  }
  return std::vector<double>(static_cast<size_t>(horizon), context.back());
}

LstmBaseline::LstmBaseline(int64_t context, int64_t horizon, int64_t hidden,
                           uint64_t seed)
    : context_(context), horizon_(horizon), hidden_(hidden) {
  if (hidden < 1) throw ConfigError("lstm: hidden_size must be >= 1");
  std::mt19937_64 rng(seed);
  params_ = LstmParams::init(1, hidden, horizon, rng);
}

Tensor LstmBaseline::forward(const Tensor& x) const {
  if (x.ndim() != 2 || x.dim(1) != context_) {
    throw ShapeError("lstm forward: expected [B," + std::to_string(context_) +
                     "], got " + shape_str(x.shape()));
  }
  Tensor seq = reshape(x, {x.dim(0), context_, 1});
  return lstm_forward(seq, params_, hidden_);
}

std::vector<NamedParam> LstmBaseline::named_parameters() {
  const char* names[] = {"wx_i", "wh_i", "b_i", "wx_f", "wh_f", "b_f",
                         "wx_g", "wh_g", "b_g", "wx_o", "wh_o", "b_o",
                         "head.w", "head.b"};
  std::vector<NamedParam> out;
  auto ts = params_.tensors();
  for (size_t i = 0; i < ts.size(); ++i) {
    out.push_back({std::string("lstm.") + names[i], *ts[i]});
  }
  return out;
}

int64_t LstmBaseline::parameter_count() { return params_.parameter_count(); }

}  // namespace gatets
