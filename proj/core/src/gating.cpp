#include "gatets/gating.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "gatets/nn.hpp"

namespace gatets {

RouterKind router_kind_from_string(const std::string& s) {
  if (s == "attention") return RouterKind::attention;
  if (s == "hmm") return RouterKind::hmm;
  if (s == "classic") return RouterKind::classic;
  throw ConfigError("unknown router kind '" + s +
                    "' (expected attention|hmm|classic)");
}

std::string to_string(RouterKind kind) {
  switch (kind) {
    case RouterKind::attention: return "attention";
    case RouterKind::hmm: return "hmm";
    case RouterKind::classic: return "classic";
  }
  return "?";
}

AttentionGateParams AttentionGateParams::init(int64_t d, int64_t experts,
                                              std::mt19937_64& rng) {
  AttentionGateParams p;
  p.w_k = Tensor::zeros({d, d}, true);
  init_affine_uniform(p.w_k, d, rng);
  p.b_k = Tensor::zeros({d}, true);
  init_affine_uniform(p.b_k, d, rng);
  p.w_q = Tensor::zeros({d, experts}, true);
  init_normal(p.w_q, 0.02, rng);
  p.b_q = Tensor::zeros({d}, true);
  init_normal(p.b_q, 0.02, rng);
  p.w_e = Tensor::zeros({d * d, experts}, true);
  init_affine_uniform(p.w_e, d * d, rng);
  return p;
}

std::vector<Tensor*> AttentionGateParams::tensors() {
  return {&w_k, &b_k, &w_q, &b_q, &w_e};
}

Tensor AttentionGateParams::expert_queries() const {
  return add_col_vector(w_q, b_q);
}

HmmGateParams HmmGateParams::init(int64_t d, int64_t experts,
                                  std::mt19937_64& rng) {
  HmmGateParams p;
  p.w = Tensor::zeros({d, d}, true);
  init_affine_uniform(p.w, d, rng);
  p.q = Tensor::zeros({d, experts}, true);
  init_normal(p.q, 0.02, rng);
  p.m = Tensor::zeros({experts}, true);  // neutral prior
  return p;
}

std::vector<Tensor*> HmmGateParams::tensors() { return {&w, &q, &m}; }

ClassicGateParams ClassicGateParams::init(int64_t d, int64_t experts,
                                          std::mt19937_64& rng) {
  ClassicGateParams p;
  p.w_g = Tensor::zeros({d, experts}, true);
  init_affine_uniform(p.w_g, d, rng);
  p.b_g = Tensor::zeros({experts}, true);
  init_affine_uniform(p.b_g, d, rng);
  return p;
}

std::vector<Tensor*> ClassicGateParams::tensors() { return {&w_g, &b_g}; }

std::vector<double> kron(const std::vector<double>& u,
                         const std::vector<double>& v) {
  if (u.size() != v.size()) {
    throw ShapeError("kron: length mismatch " + std::to_string(u.size()) +
                     " vs " + std::to_string(v.size()));
  }
  const size_t d = u.size();
  std::vector<double> out(d * d);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) out[i * d + j] = u[i] * v[j];
  return out;
}

namespace {

// A[i,e] = sum_j w_e[i*d+j, e] * eq[j, e]; the per-expert reshape of w_e
// applied to that expert's query column.
Tensor bilinear_mix(const Tensor& w_e, const Tensor& eq) {
  const int64_t d = eq.dim(0);
  const int64_t experts = eq.dim(1);
  if (w_e.ndim() != 2 || w_e.dim(0) != d * d || w_e.dim(1) != experts) {
    throw ShapeError("attention_gate_scores: w_e " + shape_str(w_e.shape()) +
                     " inconsistent with EQ " + shape_str(eq.shape()));
  }
  Tensor out = Tensor::zeros({d, experts},
                             grad_enabled() && (w_e.requires_grad() ||
                                                eq.requires_grad()));
  const double* wv = w_e.data();
  const double* qv = eq.data();
  double* ov = out.data();
  for (int64_t i = 0; i < d; ++i)
    for (int64_t e = 0; e < experts; ++e) {
      double acc = 0.0;
      for (int64_t j = 0; j < d; ++j)
        acc += wv[(i * d + j) * experts + e] * qv[j * experts + e];
      ov[i * experts + e] = acc;
    }
  if (out.requires_grad()) {
    auto node = std::make_shared<GradNode>();
    node->parents = {w_e, eq};
    Tensor w_e_c = w_e, eq_c = eq, out_c = out;
    node->backward = [w_e_c, eq_c, out_c, d, experts]() mutable {
      const double* g = out_c.grad();
      if (w_e_c.requires_grad()) {
        w_e_c.ensure_grad();
        double* gw = w_e_c.grad();
        const double* qv = eq_c.data();
        for (int64_t i = 0; i < d; ++i)
          for (int64_t j = 0; j < d; ++j)
            for (int64_t e = 0; e < experts; ++e)
              gw[(i * d + j) * experts + e] +=
                  g[i * experts + e] * qv[j * experts + e];
      }
      if (eq_c.requires_grad()) {
        eq_c.ensure_grad();
        double* gq = eq_c.grad();
        const double* wv = w_e_c.data();
        for (int64_t j = 0; j < d; ++j)
          for (int64_t e = 0; e < experts; ++e) {
            double acc = 0.0;
            for (int64_t i = 0; i < d; ++i)
              acc += g[i * experts + e] * wv[(i * d + j) * experts + e];
            gq[j * experts + e] += acc;
          }
      }
    };
    out.node() = std::move(node);
  }
  return out;
}

}  // namespace

Tensor attention_gate_scores(const Tensor& x, const AttentionGateParams& p) {
  const int64_t d = p.w_k.dim(0);
  if (x.shape().back() != d) {
    throw ShapeError("attention_gate_scores: input " + shape_str(x.shape()) +
                     " does not match d=" + std::to_string(d));
  }
  Tensor keys = linear(x, p.w_k, p.b_k);
  Tensor eq = p.expert_queries();
  Tensor mixed = bilinear_mix(p.w_e, eq);
  return scale(matmul(keys, mixed), 1.0 / std::sqrt(static_cast<double>(d)));
}

std::vector<double> attention_gate_scores_kron(const Tensor& x,
                                               const AttentionGateParams& p) {
  const int64_t d = p.w_k.dim(0);
  const int64_t experts = p.w_q.dim(1);
  const int64_t tokens = x.size() / d;
  std::vector<double> scores(tokens * experts);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> key(d), query(d);
  for (int64_t t = 0; t < tokens; ++t) {
    for (int64_t i = 0; i < d; ++i) {
      double acc = p.b_k.data()[i];
      for (int64_t j = 0; j < d; ++j) {
        acc += x.data()[t * d + j] * p.w_k.data()[j * d + i];
      }
      key[i] = acc;
    }
    for (int64_t e = 0; e < experts; ++e) {
      for (int64_t i = 0; i < d; ++i) {
        query[i] = p.w_q.data()[i * experts + e] + p.b_q.data()[i];
      }
      const std::vector<double> lifted = kron(key, query);
      double acc = 0.0;
      for (int64_t r = 0; r < d * d; ++r) {
        acc += p.w_e.data()[r * experts + e] * lifted[r];
      }
      scores[t * experts + e] = acc * inv_sqrt_d;
    }
  }
  return scores;
}

Tensor hmm_gate_scores(const Tensor& x, const HmmGateParams& p) {
  const int64_t d = p.w.dim(1);
  if (x.shape().back() != p.w.dim(0)) {
    throw ShapeError("hmm_gate_scores: input " + shape_str(x.shape()) +
                     " does not match W " + shape_str(p.w.shape()));
  }
  Tensor z = matmul(x, p.w);
  Tensor s = scale(matmul(z, p.q), 1.0 / std::sqrt(static_cast<double>(d)));
  return add(s, p.m);
}

Tensor classic_gate_scores(const Tensor& x, const ClassicGateParams& p) {
  return linear(x, p.w_g, p.b_g);
}

Tensor gate_probabilities(const Tensor& scores) { return softmax(scores, -1); }

RoutingDecision topk_renormalize(const Tensor& probs, int64_t k) {
  const int64_t experts = probs.shape().back();
  if (k < 1 || k > experts) {
    throw ConfigError("topk_renormalize: k=" + std::to_string(k) +
                      " outside [1," + std::to_string(experts) + "]");
  }
  const int64_t rows = probs.size() / experts;

  RoutingDecision out;
  out.k = k;
  out.probs = probs;
  out.mask.assign(static_cast<size_t>(rows * experts), 0);
  out.selected.assign(static_cast<size_t>(rows * k), -1);

  Tensor weights =
      Tensor::zeros(probs.shape(), grad_enabled() && probs.requires_grad());
  auto survivor_sums = std::make_shared<std::vector<double>>(rows, 0.0);

  std::vector<int> idx(static_cast<size_t>(experts));
  const double* pv = probs.data();
  double* wv = weights.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = pv + r * experts;
    std::iota(idx.begin(), idx.end(), 0);
    // Descending probability; ties resolved toward the lower expert index.
    std::stable_sort(idx.begin(), idx.end(),
                     [row](int a, int b) { return row[a] > row[b]; });
    double s = 0.0;
    for (int64_t j = 0; j < k; ++j) s += row[idx[j]];
    (*survivor_sums)[r] = s;
    for (int64_t j = 0; j < k; ++j) {
      const int e = idx[j];
      out.selected[r * k + j] = e;
      out.mask[r * experts + e] = 1;
      wv[r * experts + e] = row[e] / s;
    }
  }

  if (weights.requires_grad()) {
    auto node = std::make_shared<GradNode>();
    node->parents = {probs};
    Tensor probs_c = probs, weights_c = weights;
    auto selected = std::make_shared<std::vector<int>>(out.selected);
    node->backward = [probs_c, weights_c, selected, survivor_sums, rows,
                      experts, k]() mutable {
      probs_c.ensure_grad();
      const double* g = weights_c.grad();
      const double* w = weights_c.data();
      double* gp = probs_c.grad();
      for (int64_t r = 0; r < rows; ++r) {
        const double s = (*survivor_sums)[r];
        double dot = 0.0;
        for (int64_t j = 0; j < k; ++j) {
          const int e = (*selected)[r * k + j];
          dot += g[r * experts + e] * w[r * experts + e];
        }
        for (int64_t j = 0; j < k; ++j) {
          const int e = (*selected)[r * k + j];
          gp[r * experts + e] += (g[r * experts + e] - dot) / s;
        }
      }
    };
    weights.node() = std::move(node);
  }
  out.weights = weights;
  return out;
}

}  // namespace gatets
