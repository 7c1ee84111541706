#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gatets/tensor.hpp"

namespace gatets {

enum class RouterKind { attention, hmm, classic };

RouterKind router_kind_from_string(const std::string& s);
std::string to_string(RouterKind kind);

// Attention-inspired gate: tokens are projected to keys, experts own
// learnable input-agnostic queries, and scores come from projecting the
// key/query Kronecker interaction into expert space.
struct AttentionGateParams {
  Tensor w_k;  // [d,d] key projection
  Tensor b_k;  // [d]
  Tensor w_q;  // [d,E] expert queries
  Tensor b_q;  // [d], broadcast across expert columns
  Tensor w_e;  // [d*d,E] expert-space projection

  static AttentionGateParams init(int64_t d, int64_t experts,
                                  std::mt19937_64& rng);
  std::vector<Tensor*> tensors();
  // EQ = w_q + b_q; input-agnostic by construction.
  Tensor expert_queries() const;
};

struct HmmGateParams {
  Tensor w;  // [d,d] input-to-embedding map
  Tensor q;  // [d,E] query matrix
  Tensor m;  // [E] log-prior over experts (unconstrained)

  static HmmGateParams init(int64_t d, int64_t experts, std::mt19937_64& rng);
  std::vector<Tensor*> tensors();
};

struct ClassicGateParams {
  Tensor w_g;  // [d,E]
  Tensor b_g;  // [E]

  static ClassicGateParams init(int64_t d, int64_t experts,
                                std::mt19937_64& rng);
  std::vector<Tensor*> tensors();
};

// Row-major outer-product flattening: result[i*d + j] = u[i] * v[j].
std::vector<double> kron(const std::vector<double>& u,
                         const std::vector<double>& v);

// S[t,e] = dot(w_e[:,e], kron(K[t], EQ[:,e])) / sqrt(d). Computed via the
// algebraically identical contraction A[:,e] = reshape(w_e[:,e],[d,d]) EQ[:,e]
// followed by S = K A / sqrt(d), which avoids materializing d^2 features.
Tensor attention_gate_scores(const Tensor& x, const AttentionGateParams& p);

// Literal kron-route scorer (no gradient): materializes each (token, expert)
// Kronecker feature. The production path must agree with it to 1e-10;
// selfcheck enforces this.
std::vector<double> attention_gate_scores_kron(const Tensor& x,
                                               const AttentionGateParams& p);

// S[t,e] = dot(Z[t], q[:,e]) / sqrt(d) + m[e] with Z = X w.
Tensor hmm_gate_scores(const Tensor& x, const HmmGateParams& p);

// S = X w_g + b_g.
Tensor classic_gate_scores(const Tensor& x, const ClassicGateParams& p);

// Row-wise softmax over the expert axis.
Tensor gate_probabilities(const Tensor& scores);

struct RoutingDecision {
  Tensor probs;                // [B,T,E] dense distribution
  Tensor weights;              // [B,T,E] exactly-k-sparse, renormalized
  std::vector<uint8_t> mask;   // B*T*E, exactly k ones per token
  std::vector<int> selected;   // B*T*k indices, descending probability
  int64_t k = 0;
};

// Keeps the k largest probabilities per token (ties to the lower expert
// index), zeroes the rest and renormalizes survivors to sum 1. Gradient
// flows only through the surviving entries.
RoutingDecision topk_renormalize(const Tensor& probs, int64_t k);

}  // namespace gatets
