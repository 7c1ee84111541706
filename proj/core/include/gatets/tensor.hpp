#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gatets/errors.hpp"
#include "gatets/rng.hpp"

namespace gatets {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

// Reverse-mode tape node. `parents` keeps the upstream tensors alive until
// backward() has run; `backward` accumulates into their grad buffers.
struct GradNode {
  std::vector<Tensor> parents;
  std::function<void()> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  std::shared_ptr<GradNode> node;
};

// Dense 64-bit tensor with optional gradient tracking. Copies are shallow:
// they share the underlying buffer, matching the usual autograd idiom where
// a Tensor is a handle into the tape. Like shared_ptr, a const Tensor is a
// const handle, not a read-only buffer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t size() const { return static_cast<int64_t>(impl_->value.size()); }
  int64_t dim(size_t i) const { return impl_->shape[i]; }
  size_t ndim() const { return impl_->shape.size(); }

  double* data() const { return impl_->value.data(); }
  std::vector<double>& values() const { return impl_->value; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) const { impl_->requires_grad = rg; }

  // Grad buffer; null until ensure_grad() or a backward pass touched it.
  double* grad() const {
    return impl_->grad.empty() ? nullptr : impl_->grad.data();
  }
  void ensure_grad() const;
  void zero_grad() const;

  double item() const;

  // Backpropagate from a scalar. Clears tape links afterwards so buffers of
  // intermediate results can be reclaimed.
  void backward() const;

  TensorImpl* impl() const { return impl_.get(); }
  std::shared_ptr<GradNode>& node() const { return impl_->node; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<TensorImpl> impl_;
};

// Thread-local gradient mode. Evaluation wraps forward passes in NoGradGuard
// so no tape is recorded.
bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool saved_;
};

// Randomness context threaded through stochastic ops (dropout). Streams are
// keyed on (seed, step, call index) so replays and checkpoint resumes are
// bit-exact.
struct RngCtx {
  bool train = false;
  uint64_t seed = 0;
  uint64_t step = 0;
  mutable uint64_t call = 0;
};

// ---- elementwise / structural ----
Tensor add(const Tensor& a, const Tensor& b);  // same shape, or b broadcast
                                               // as a trailing-dims suffix
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_col_vector(const Tensor& w, const Tensor& b);  // [r,c] + [r]
Tensor relu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose_last2(const Tensor& x);
Tensor slice_time(const Tensor& x, int64_t t);  // [B,T,...] -> [B,...]
Tensor row_gather(const Tensor& x, const std::vector<int64_t>& rows);
Tensor split_heads(const Tensor& x, int64_t heads);  // [B,T,d]->[B*h,T,d/h]
Tensor merge_heads(const Tensor& x, int64_t heads);  // [B*h,T,hd]->[B,T,d]

// ---- linear algebra ----
Tensor matmul(const Tensor& x, const Tensor& w);  // [...,n] x [n,m]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor bmm(const Tensor& a, const Tensor& b);  // [N,R,C] x [N,C,M]

// ---- normalization / activation over last axis ----
Tensor softmax(const Tensor& x, int axis = -1);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// ---- stochastic ----
Tensor dropout(const Tensor& x, double p, const RngCtx& ctx);

// ---- reductions / losses ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse_loss(const Tensor& pred, const Tensor& target);

bool all_finite(const Tensor& x);

}  // namespace gatets
