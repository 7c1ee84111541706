#include "gatets/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace gatets {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<TensorImpl> make_impl(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->value.assign(static_cast<size_t>(numel(shape)), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return impl;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : saved_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = saved_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_impl(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  std::fill(impl->value.begin(), impl->value.end(), fill);
  return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values,
                         bool requires_grad) {
  if (numel(shape) != static_cast<int64_t>(values.size())) {
    throw ShapeError("from_data: " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

void Tensor::ensure_grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0);
}

void Tensor::zero_grad() const {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item: tensor has shape " + shape_str(shape()));
  }
  return impl_->value[0];
}

void Tensor::backward() const {
  if (size() != 1) {
    throw NumericError("backward: root must be a scalar, got " +
                       shape_str(shape()));
  }
  // Post-order DFS over tape nodes; reverse gives a valid execution order.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  if (impl_->node) {
    visited.insert(impl_.get());
    stack.emplace_back(impl_.get(), 0);
  }
  while (!stack.empty()) {
    TensorImpl* cur = stack.back().first;
    size_t idx = stack.back().second;
    if (idx < cur->node->parents.size()) {
      ++stack.back().second;
      TensorImpl* parent = cur->node->parents[idx].impl();
      if (parent->node && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(cur);
      stack.pop_back();
    }
  }
  ensure_grad();
  impl_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* n = *it;
    if (!n->grad.empty() && n->node->backward) n->node->backward();
  }
  // Drop tape links so intermediate buffers can be reclaimed.
  for (TensorImpl* n : order) n->node.reset();
}

namespace {

bool want_grad(const Tensor& t) { return g_grad_enabled && t.requires_grad(); }

Tensor make_result(Shape shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

void attach(Tensor& out, std::vector<Tensor> parents,
            std::function<void()> backward) {
  if (!out.requires_grad()) return;
  auto node = std::make_shared<GradNode>();
  node->parents = std::move(parents);
  node->backward = std::move(backward);
  out.node() = std::move(node);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// True when b's shape is a trailing suffix of a's shape.
bool is_suffix(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const bool broadcast = a.shape() != b.shape();
  if (broadcast && !is_suffix(a.shape(), b.shape())) {
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const size_t n = static_cast<size_t>(a.size());
  const size_t bn = static_cast<size_t>(b.size());
  Tensor out = make_result(a.shape(), want_grad(a) || want_grad(b));
  const double* av = a.data();
  const double* bv = b.data();
  double* ov = out.data();
  for (size_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i % bn];
  attach(out, {a, b}, [a, b, out, n, bn]() mutable {
    const double* g = out.grad();
    if (a.requires_grad()) {
      a.ensure_grad();
      double* ga = a.grad();
      for (size_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      double* gb = b.grad();
      for (size_t i = 0; i < n; ++i) gb[i % bn] += g[i];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  const size_t n = static_cast<size_t>(a.size());
  Tensor out = make_result(a.shape(), want_grad(a) || want_grad(b));
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  attach(out, {a, b}, [a, b, out, n]() mutable {
    const double* g = out.grad();
    if (a.requires_grad()) {
      a.ensure_grad();
      for (size_t i = 0; i < n; ++i) a.grad()[i] += g[i];
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      for (size_t i = 0; i < n; ++i) b.grad()[i] -= g[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  const size_t n = static_cast<size_t>(a.size());
  Tensor out = make_result(a.shape(), want_grad(a) || want_grad(b));
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  attach(out, {a, b}, [a, b, out, n]() mutable {
    const double* g = out.grad();
    if (a.requires_grad()) {
      a.ensure_grad();
      for (size_t i = 0; i < n; ++i) a.grad()[i] += g[i] * b.data()[i];
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      for (size_t i = 0; i < n; ++i) b.grad()[i] += g[i] * a.data()[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double c) {
  const size_t n = static_cast<size_t>(a.size());
  Tensor out = make_result(a.shape(), want_grad(a));
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
  attach(out, {a}, [a, out, c, n]() mutable {
    if (!a.requires_grad()) return;
    a.ensure_grad();
    const double* g = out.grad();
    for (size_t i = 0; i < n; ++i) a.grad()[i] += g[i] * c;
  });
  return out;
}

Tensor add_col_vector(const Tensor& w, const Tensor& b) {
  if (w.ndim() != 2 || b.ndim() != 1 || w.dim(0) != b.dim(0)) {
    throw ShapeError("add_col_vector: " + shape_str(w.shape()) + " + " +
                     shape_str(b.shape()));
  }
  const size_t rows = static_cast<size_t>(w.dim(0));
  const size_t cols = static_cast<size_t>(w.dim(1));
  Tensor out = make_result(w.shape(), want_grad(w) || want_grad(b));
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j)
      out.data()[i * cols + j] = w.data()[i * cols + j] + b.data()[i];
  attach(out, {w, b}, [w, b, out, rows, cols]() mutable {
    const double* g = out.grad();
    if (w.requires_grad()) {
      w.ensure_grad();
      for (size_t i = 0; i < rows * cols; ++i) w.grad()[i] += g[i];
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      for (size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < cols; ++j) acc += g[i * cols + j];
        b.grad()[i] += acc;
      }
    }
  });
  return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const Tensor& x, Fwd f, Bwd dfdy) {
  const size_t n = static_cast<size_t>(x.size());
  Tensor out = make_result(x.shape(), want_grad(x));
  for (size_t i = 0; i < n; ++i) out.data()[i] = f(x.data()[i]);
  attach(out, {x}, [x, out, dfdy, n]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    const double* g = out.grad();
    for (size_t i = 0; i < n; ++i)
      x.grad()[i] += g[i] * dfdy(x.data()[i], out.data()[i]);
  });
  return out;
}

}  // namespace

Tensor relu(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh_op(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  Tensor out = Tensor::from_data(std::move(shape), x.values(), want_grad(x));
  const size_t n = static_cast<size_t>(x.size());
  attach(out, {x}, [x, out, n]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    const double* g = out.grad();
    for (size_t i = 0; i < n; ++i) x.grad()[i] += g[i];
  });
  return out;
}

Tensor transpose_last2(const Tensor& x) {
  if (x.ndim() < 2) throw ShapeError("transpose_last2: needs >=2 dims");
  Shape s = x.shape();
  const size_t r = static_cast<size_t>(s[s.size() - 2]);
  const size_t c = static_cast<size_t>(s.back());
  std::swap(s[s.size() - 2], s[s.size() - 1]);
  const size_t batches = static_cast<size_t>(x.size()) / (r * c);
  Tensor out = make_result(std::move(s), want_grad(x));
  for (size_t b = 0; b < batches; ++b) {
    const double* src = x.data() + b * r * c;
    double* dst = out.data() + b * r * c;
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
  }
  attach(out, {x}, [x, out, batches, r, c]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    for (size_t b = 0; b < batches; ++b) {
      const double* g = out.grad() + b * r * c;
      double* gx = x.grad() + b * r * c;
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    }
  });
  return out;
}

Tensor slice_time(const Tensor& x, int64_t t) {
  if (x.ndim() < 2) throw ShapeError("slice_time: needs >=2 dims");
  const int64_t batch = x.dim(0);
  const int64_t steps = x.dim(1);
  if (t < 0 || t >= steps) {
    throw ShapeError("slice_time: index " + std::to_string(t) +
                     " out of range for " + shape_str(x.shape()));
  }
  Shape s{batch};
  for (size_t i = 2; i < x.ndim(); ++i) s.push_back(x.dim(i));
  const size_t inner = static_cast<size_t>(numel(s)) / batch;
  Tensor out = make_result(std::move(s), want_grad(x));
  for (int64_t b = 0; b < batch; ++b) {
    const double* src = x.data() + (b * steps + t) * inner;
    std::copy(src, src + inner, out.data() + b * inner);
  }
  attach(out, {x}, [x, out, batch, steps, t, inner]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    for (int64_t b = 0; b < batch; ++b) {
      const double* g = out.grad() + b * inner;
      double* gx = x.grad() + (b * steps + t) * inner;
      for (size_t i = 0; i < inner; ++i) gx[i] += g[i];
    }
  });
  return out;
}

Tensor row_gather(const Tensor& x, const std::vector<int64_t>& rows) {
  if (x.ndim() < 1) throw ShapeError("row_gather: needs >=1 dim");
  const int64_t batch = x.dim(0);
  const size_t inner = static_cast<size_t>(x.size()) / batch;
  for (int64_t r : rows) {
    if (r < 0 || r >= batch) {
      throw ShapeError("row_gather: row " + std::to_string(r) +
                       " out of range for " + shape_str(x.shape()));
    }
  }
  Shape s = x.shape();
  s[0] = static_cast<int64_t>(rows.size());
  Tensor out = make_result(std::move(s), want_grad(x));
  for (size_t i = 0; i < rows.size(); ++i) {
    const double* src = x.data() + rows[i] * inner;
    std::copy(src, src + inner, out.data() + i * inner);
  }
  attach(out, {x}, [x, out, rows, inner]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    for (size_t i = 0; i < rows.size(); ++i) {
      const double* g = out.grad() + i * inner;
      double* gx = x.grad() + rows[i] * inner;
      for (size_t j = 0; j < inner; ++j) gx[j] += g[j];
    }
  });
  return out;
}

Tensor split_heads(const Tensor& x, int64_t heads) {
  if (x.ndim() != 3) throw ShapeError("split_heads: expects [B,T,d]");
  const int64_t batch = x.dim(0), steps = x.dim(1), width = x.dim(2);
  if (width % heads != 0) {
    throw ConfigError("split_heads: d=" + std::to_string(width) +
                      " not divisible by heads=" + std::to_string(heads));
  }
  const int64_t hd = width / heads;
  Tensor out = make_result({batch * heads, steps, hd}, want_grad(x));
  const double* xv = x.data();
  double* ov = out.data();
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t t = 0; t < steps; ++t)
      for (int64_t h = 0; h < heads; ++h) {
        const double* src = xv + (b * steps + t) * width + h * hd;
        double* dst = ov + ((b * heads + h) * steps + t) * hd;
        std::copy(src, src + hd, dst);
      }
  attach(out, {x}, [x, out, batch, steps, heads, hd, width]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    const double* g = out.grad();
    double* gx = x.grad();
    for (int64_t b = 0; b < batch; ++b)
      for (int64_t t = 0; t < steps; ++t)
        for (int64_t h = 0; h < heads; ++h) {
          const double* src = g + ((b * heads + h) * steps + t) * hd;
          double* dst = gx + (b * steps + t) * width + h * hd;
          for (int64_t i = 0; i < hd; ++i) dst[i] += src[i];
        }
  });
  return out;
}

Tensor merge_heads(const Tensor& x, int64_t heads) {
  if (x.ndim() != 3) throw ShapeError("merge_heads: expects [B*h,T,hd]");
  const int64_t bh = x.dim(0), steps = x.dim(1), hd = x.dim(2);
  if (bh % heads != 0) {
    throw ConfigError("merge_heads: leading dim " + std::to_string(bh) +
                      " not divisible by heads=" + std::to_string(heads));
  }
  const int64_t batch = bh / heads;
  const int64_t width = heads * hd;
  Tensor out = make_result({batch, steps, width}, want_grad(x));
  const double* xv = x.data();
  double* ov = out.data();
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t t = 0; t < steps; ++t)
      for (int64_t h = 0; h < heads; ++h) {
        const double* src = xv + ((b * heads + h) * steps + t) * hd;
        double* dst = ov + (b * steps + t) * width + h * hd;
        std::copy(src, src + hd, dst);
      }
  attach(out, {x}, [x, out, batch, steps, heads, hd, width]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    const double* g = out.grad();
    double* gx = x.grad();
    for (int64_t b = 0; b < batch; ++b)
      for (int64_t t = 0; t < steps; ++t)
        for (int64_t h = 0; h < heads; ++h) {
          const double* src = g + (b * steps + t) * width + h * hd;
          double* dst = gx + ((b * heads + h) * steps + t) * hd;
          for (int64_t i = 0; i < hd; ++i) dst[i] += src[i];
        }
  });
  return out;
}

namespace {

void check_matmul_shapes(const Tensor& x, const Tensor& w) {
  if (w.ndim() != 2 || x.ndim() < 1 || x.shape().back() != w.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree, x " +
                     shape_str(x.shape()) + " vs W " + shape_str(w.shape()));
  }
}

void matmul_forward(const double* x, const double* w, double* out, size_t rows,
                    size_t n, size_t m) {
  for (size_t r = 0; r < rows; ++r) {
    double* o = out + r * m;
    const double* xr = x + r * n;
    for (size_t k = 0; k < n; ++k) {
      const double a = xr[k];
      const double* wr = w + k * m;
      for (size_t j = 0; j < m; ++j) o[j] += a * wr[j];
    }
  }
}

void matmul_backward(const Tensor& x, const Tensor& w, const double* g,
                     size_t rows, size_t n, size_t m) {
  if (x.requires_grad()) {
    Tensor xt = x;
    xt.ensure_grad();
    double* gx = xt.grad();
    const double* wv = w.data();
    for (size_t r = 0; r < rows; ++r) {
      const double* gr = g + r * m;
      double* gxr = gx + r * n;
      for (size_t k = 0; k < n; ++k) {
        const double* wr = wv + k * m;
        double acc = 0.0;
        for (size_t j = 0; j < m; ++j) acc += gr[j] * wr[j];
        gxr[k] += acc;
      }
    }
  }
  if (w.requires_grad()) {
    Tensor wt = w;
    wt.ensure_grad();
    double* gw = wt.grad();
    const double* xv = x.data();
    for (size_t r = 0; r < rows; ++r) {
      const double* gr = g + r * m;
      const double* xr = xv + r * n;
      for (size_t k = 0; k < n; ++k) {
        const double a = xr[k];
        double* gwr = gw + k * m;
        for (size_t j = 0; j < m; ++j) gwr[j] += a * gr[j];
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& x, const Tensor& w) {
  check_matmul_shapes(x, w);
  const size_t n = static_cast<size_t>(w.dim(0));
  const size_t m = static_cast<size_t>(w.dim(1));
  const size_t rows = static_cast<size_t>(x.size()) / n;
  Shape out_shape = x.shape();
  out_shape.back() = static_cast<int64_t>(m);
  Tensor out = make_result(std::move(out_shape), want_grad(x) || want_grad(w));
  matmul_forward(x.data(), w.data(), out.data(), rows, n, m);
  attach(out, {x, w}, [x, w, out, rows, n, m]() mutable {
    matmul_backward(x, w, out.grad(), rows, n, m);
  });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_matmul_shapes(x, w);
  if (b.ndim() != 1 || b.dim(0) != w.dim(1)) {
    throw ShapeError("linear: bias " + shape_str(b.shape()) +
                     " does not match W " + shape_str(w.shape()));
  }
  const size_t n = static_cast<size_t>(w.dim(0));
  const size_t m = static_cast<size_t>(w.dim(1));
  const size_t rows = static_cast<size_t>(x.size()) / n;
  Shape out_shape = x.shape();
  out_shape.back() = static_cast<int64_t>(m);
  Tensor out = make_result(std::move(out_shape),
                           want_grad(x) || want_grad(w) || want_grad(b));
  double* ov = out.data();
  const double* bv = b.data();
  for (size_t r = 0; r < rows; ++r) std::copy(bv, bv + m, ov + r * m);
  matmul_forward(x.data(), w.data(), ov, rows, n, m);
  attach(out, {x, w, b}, [x, w, b, out, rows, n, m]() mutable {
    const double* g = out.grad();
    matmul_backward(x, w, g, rows, n, m);
    if (b.requires_grad()) {
      b.ensure_grad();
      double* gb = b.grad();
      for (size_t r = 0; r < rows; ++r) {
        const double* gr = g + r * m;
        for (size_t j = 0; j < m; ++j) gb[j] += gr[j];
      }
    }
  });
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != b.dim(1)) {
    throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  const size_t batches = static_cast<size_t>(a.dim(0));
  const size_t r = static_cast<size_t>(a.dim(1));
  const size_t c = static_cast<size_t>(a.dim(2));
  const size_t m = static_cast<size_t>(b.dim(2));
  Tensor out = make_result({a.dim(0), a.dim(1), b.dim(2)},
                           want_grad(a) || want_grad(b));
  for (size_t n = 0; n < batches; ++n) {
    matmul_forward(a.data() + n * r * c, b.data() + n * c * m,
                   out.data() + n * r * m, r, c, m);
  }
  attach(out, {a, b}, [a, b, out, batches, r, c, m]() mutable {
    const double* g = out.grad();
    if (a.requires_grad()) {
      a.ensure_grad();
      for (size_t n = 0; n < batches; ++n) {
        const double* gn = g + n * r * m;
        const double* bn = b.data() + n * c * m;
        double* ga = a.grad() + n * r * c;
        for (size_t i = 0; i < r; ++i)
          for (size_t k = 0; k < c; ++k) {
            double acc = 0.0;
            for (size_t j = 0; j < m; ++j) acc += gn[i * m + j] * bn[k * m + j];
            ga[i * c + k] += acc;
          }
      }
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      for (size_t n = 0; n < batches; ++n) {
        const double* gn = g + n * r * m;
        const double* an = a.data() + n * r * c;
        double* gb = b.grad() + n * c * m;
        for (size_t i = 0; i < r; ++i)
          for (size_t k = 0; k < c; ++k) {
            const double v = an[i * c + k];
            for (size_t j = 0; j < m; ++j) gb[k * m + j] += v * gn[i * m + j];
          }
      }
    }
  });
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  const int nd = static_cast<int>(x.ndim());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) {
    throw ShapeError("softmax: axis out of range for " + shape_str(x.shape()));
  }
  for (int64_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x.data()[i])) {
      throw NumericError("softmax: non-finite input");
    }
  }
  const size_t n = static_cast<size_t>(x.dim(axis));
  size_t inner = 1;
  for (int i = axis + 1; i < nd; ++i) inner *= static_cast<size_t>(x.dim(i));
  const size_t outer = static_cast<size_t>(x.size()) / (n * inner);
  Tensor out = make_result(x.shape(), want_grad(x));
  const double* xv = x.data();
  double* ov = out.data();
  for (size_t o = 0; o < outer; ++o) {
    for (size_t j = 0; j < inner; ++j) {
      const size_t base = o * n * inner + j;
      double mx = xv[base];
      for (size_t i = 1; i < n; ++i) mx = std::max(mx, xv[base + i * inner]);
      double denom = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double e = std::exp(xv[base + i * inner] - mx);
        ov[base + i * inner] = e;
        denom += e;
      }
      for (size_t i = 0; i < n; ++i) ov[base + i * inner] /= denom;
    }
  }
  attach(out, {x}, [x, out, outer, n, inner]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    const double* g = out.grad();
    const double* y = out.data();
    double* gx = x.grad();
    for (size_t o = 0; o < outer; ++o) {
      for (size_t j = 0; j < inner; ++j) {
        const size_t base = o * n * inner + j;
        double dot = 0.0;
        for (size_t i = 0; i < n; ++i)
          dot += g[base + i * inner] * y[base + i * inner];
        for (size_t i = 0; i < n; ++i) {
          const size_t at = base + i * inner;
          gx[at] += y[at] * (g[at] - dot);
        }
      }
    }
  });
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (eps <= 0.0) throw ConfigError("layer_norm: eps must be positive");
  const size_t d = static_cast<size_t>(x.shape().back());
  if (gamma.size() != static_cast<int64_t>(d) ||
      beta.size() != static_cast<int64_t>(d)) {
    throw ShapeError("layer_norm: affine params must have length " +
                     std::to_string(d));
  }
  const size_t rows = static_cast<size_t>(x.size()) / d;
  Tensor out = make_result(x.shape(),
                           want_grad(x) || want_grad(gamma) || want_grad(beta));
  // Normalized values and inverse stddevs are needed again in backward.
  auto xhat = std::make_shared<std::vector<double>>(rows * d);
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const double* xv = x.data();
  double* ov = out.data();
  const double* gv = gamma.data();
  const double* bv = beta.data();
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = xv + r * d;
    double mean = 0.0;
    for (size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (size_t i = 0; i < d; ++i) {
      const double c = xr[i] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (size_t i = 0; i < d; ++i) {
      const double h = (xr[i] - mean) * inv;
      (*xhat)[r * d + i] = h;
      ov[r * d + i] = h * gv[i] + bv[i];
    }
  }
  attach(out, {x, gamma, beta},
         [x, gamma, beta, out, xhat, inv_std, rows, d]() mutable {
           const double* g = out.grad();
           if (beta.requires_grad()) {
             beta.ensure_grad();
             double* gb = beta.grad();
             for (size_t r = 0; r < rows; ++r)
               for (size_t i = 0; i < d; ++i) gb[i] += g[r * d + i];
           }
           if (gamma.requires_grad()) {
             gamma.ensure_grad();
             double* gg = gamma.grad();
             for (size_t r = 0; r < rows; ++r)
               for (size_t i = 0; i < d; ++i)
                 gg[i] += g[r * d + i] * (*xhat)[r * d + i];
           }
           if (x.requires_grad()) {
             x.ensure_grad();
             double* gx = x.grad();
             const double* gv = gamma.data();
             const double dn = static_cast<double>(d);
             for (size_t r = 0; r < rows; ++r) {
               double sum_gy = 0.0, sum_gyh = 0.0;
               for (size_t i = 0; i < d; ++i) {
                 const double gy = g[r * d + i] * gv[i];
                 sum_gy += gy;
                 sum_gyh += gy * (*xhat)[r * d + i];
               }
               const double inv = (*inv_std)[r];
               for (size_t i = 0; i < d; ++i) {
                 const double gy = g[r * d + i] * gv[i];
                 const double h = (*xhat)[r * d + i];
                 gx[r * d + i] +=
                     inv * (gy - sum_gy / dn - h * sum_gyh / dn);
               }
             }
           }
         });
  return out;
}

Tensor dropout(const Tensor& x, double p, const RngCtx& ctx) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout: p must lie in [0,1), got " + std::to_string(p));
  }
  if (!ctx.train || p == 0.0) return x;
  const uint64_t stream = (ctx.step << 16) ^ ctx.call++;
  const size_t n = static_cast<size_t>(x.size());
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<uint8_t>>(n);
  Tensor out = make_result(x.shape(), want_grad(x));
  for (size_t i = 0; i < n; ++i) {
    const bool keep = stream_uniform(ctx.seed, stream, i) >= p;
    (*mask)[i] = keep;
    out.data()[i] = keep ? x.data()[i] * keep_scale : 0.0;
  }
  attach(out, {x}, [x, out, mask, keep_scale, n]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    const double* g = out.grad();
    for (size_t i = 0; i < n; ++i) {
      if ((*mask)[i]) x.grad()[i] += g[i] * keep_scale;
    }
  });
  return out;
}

Tensor sum(const Tensor& x) {
  const size_t n = static_cast<size_t>(x.size());
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x.data()[i];
  Tensor out = Tensor::from_data({1}, {acc}, want_grad(x));
  attach(out, {x}, [x, out, n]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    const double g = out.grad()[0];
    for (size_t i = 0; i < n; ++i) x.grad()[i] += g;
  });
  return out;
}

Tensor mean(const Tensor& x) {
  const size_t n = static_cast<size_t>(x.size());
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x.data()[i];
  const double inv = 1.0 / static_cast<double>(n);
  Tensor out = Tensor::from_data({1}, {acc * inv}, want_grad(x));
  attach(out, {x}, [x, out, n, inv]() mutable {
    if (!x.requires_grad()) return;
    x.ensure_grad();
    const double g = out.grad()[0] * inv;
    for (size_t i = 0; i < n; ++i) x.grad()[i] += g;
  });
  return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "mse_loss");
  const size_t n = static_cast<size_t>(pred.size());
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double diff = pred.data()[i] - target.data()[i];
    acc += diff * diff;
  }
  const double inv = 1.0 / static_cast<double>(n);
  Tensor out = Tensor::from_data({1}, {acc * inv},
                                 want_grad(pred) || want_grad(target));
  attach(out, {pred, target}, [pred, target, out, n, inv]() mutable {
    const double g = out.grad()[0];
    if (pred.requires_grad()) {
      pred.ensure_grad();
      for (size_t i = 0; i < n; ++i)
        pred.grad()[i] += g * 2.0 * inv * (pred.data()[i] - target.data()[i]);
    }
    if (target.requires_grad()) {
      target.ensure_grad();
      for (size_t i = 0; i < n; ++i)
        target.grad()[i] -= g * 2.0 * inv * (pred.data()[i] - target.data()[i]);
    }
  });
  return out;
}

bool all_finite(const Tensor& x) {
  for (int64_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x.data()[i])) return false;
  }
  return true;
}

}  // namespace gatets
