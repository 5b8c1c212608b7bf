#include "msda/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <unordered_set>

#include "msda/errors.hpp"

namespace msda {

namespace {

std::atomic<std::uint64_t> g_seq{0};

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::shared_ptr<detail::Node> make_node(std::vector<int> shape,
                                        std::vector<double> value) {
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

detail::Node* req(const Tensor& t) {
  if (!t.defined()) throw ValueError("operation on undefined tensor");
  return t.node().get();
}

void ensure_grad(detail::Node* n) {
  if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
}

// Wires parents/backprop only when a parent requires grad, so pure value
// tensors never record a graph.
Tensor finish(std::shared_ptr<detail::Node> out,
              std::vector<std::shared_ptr<detail::Node>> parents,
              std::function<void()> backprop) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  if (rg) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backprop = std::move(backprop);
  }
  return Tensor(std::move(out));
}

enum class BinKind { kAdd, kSub, kMul };

Tensor binary_op(const Tensor& ta, const Tensor& tb, BinKind kind) {
  detail::Node* a = req(ta);
  detail::Node* b = req(tb);
  const bool a_scalar = a->value.size() == 1;
  const bool b_scalar = b->value.size() == 1;
  if (!(a->shape == b->shape || a_scalar || b_scalar)) {
    throw ShapeError("elementwise operands must match shapes or broadcast a scalar");
  }
  const std::vector<int>& out_shape = a_scalar && !b_scalar ? b->shape : a->shape;
  const std::size_t n = a_scalar && !b_scalar ? b->value.size() : a->value.size();

  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a->value[a_scalar ? 0 : i];
    const double y = b->value[b_scalar ? 0 : i];
    switch (kind) {
      case BinKind::kAdd: v[i] = x + y; break;
      case BinKind::kSub: v[i] = x - y; break;
      case BinKind::kMul: v[i] = x * y; break;
    }
  }
  auto out = make_node(out_shape, std::move(v));
  detail::Node* o = out.get();
  return finish(out, {ta.node(), tb.node()}, [a, b, o, a_scalar, b_scalar, kind] {
    const std::size_t n = o->value.size();
    if (a->requires_grad) {
      ensure_grad(a);
      for (std::size_t i = 0; i < n; ++i) {
        double g = o->grad[i];
        if (kind == BinKind::kMul) g *= b->value[b_scalar ? 0 : i];
        a->grad[a_scalar ? 0 : i] += g;
      }
    }
    if (b->requires_grad) {
      ensure_grad(b);
      for (std::size_t i = 0; i < n; ++i) {
        double g = o->grad[i];
        if (kind == BinKind::kSub) g = -g;
        if (kind == BinKind::kMul) g = o->grad[i] * a->value[a_scalar ? 0 : i];
        b->grad[b_scalar ? 0 : i] += g;
      }
    }
  });
}

using MapFn = double (*)(double);
using MapGradFn = double (*)(double);

Tensor unary_op(const Tensor& tx, MapFn f, MapGradFn dfdx) {
  detail::Node* x = req(tx);
  std::vector<double> v(x->value.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(x->value[i]);
  auto out = make_node(x->shape, std::move(v));
  detail::Node* o = out.get();
  return finish(out, {tx.node()}, [x, o, dfdx] {
    ensure_grad(x);
    for (std::size_t i = 0; i < o->value.size(); ++i) {
      x->grad[i] += o->grad[i] * dfdx(x->value[i]);
    }
  });
}

void check_2d(const detail::Node* n, const char* what) {
  if (n->shape.size() != 2) throw ShapeError(std::string(what) + " requires a 2-D tensor");
}

}  // namespace

double ipow(double x, int k) {
  if (k < 0) throw ValueError("ipow: negative exponent");
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("data length does not match shape");
  }
  auto n = make_node(std::move(shape), std::move(data));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> data, bool requires_grad) {
  return from_data({rows, cols}, std::move(data), requires_grad);
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  std::vector<double> d(shape_numel(shape), 0.0);
  return from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
  std::vector<double> d(shape_numel(shape), v);
  return from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

const std::vector<int>& Tensor::shape() const { return req(*this)->shape; }
int Tensor::ndim() const { return static_cast<int>(req(*this)->shape.size()); }
std::size_t Tensor::numel() const { return req(*this)->value.size(); }

int Tensor::rows() const {
  check_2d(req(*this), "rows()");
  return n_->shape[0];
}

int Tensor::cols() const {
  check_2d(req(*this), "cols()");
  return n_->shape[1];
}

const std::vector<double>& Tensor::data() const { return req(*this)->value; }
std::vector<double>& Tensor::mutable_data() { return req(*this)->value; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() requires a one-element tensor");
  return n_->value[0];
}

double Tensor::at(int i, int j) const {
  check_2d(req(*this), "at()");
  if (i < 0 || i >= n_->shape[0] || j < 0 || j >= n_->shape[1]) {
    throw IndexError("at(): index out of range");
  }
  return n_->value[static_cast<std::size_t>(i) * n_->shape[1] + j];
}

bool Tensor::requires_grad() const { return req(*this)->requires_grad; }

const std::vector<double>& Tensor::grad() const {
  detail::Node* n = req(*this);
  ensure_grad(n);
  return n->grad;
}

void Tensor::zero_grad() {
  detail::Node* n = req(*this);
  n->grad.assign(n->value.size(), 0.0);
}

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::kMul); }

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });  // subgradient 0 at 0
}

Tensor abs(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::fabs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& x) {
  for (double v : req(x)->value) {
    if (v <= 0.0) throw ValueError("log: input must be positive");
  }
  return unary_op(
      x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Tensor pow_k(const Tensor& tx, int k) {
  if (k < 0) throw ValueError("pow_k: exponent must be non-negative");
  detail::Node* x = req(tx);
  std::vector<double> v(x->value.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = ipow(x->value[i], k);
  auto out = make_node(x->shape, std::move(v));
  detail::Node* o = out.get();
  return finish(out, {tx.node()}, [x, o, k] {
    ensure_grad(x);
    for (std::size_t i = 0; i < o->value.size(); ++i) {
      const double d = k == 0 ? 0.0 : k * ipow(x->value[i], k - 1);
      x->grad[i] += o->grad[i] * d;
    }
  });
}

Tensor matmul(const Tensor& ta, const Tensor& tb) {
  detail::Node* a = req(ta);
  detail::Node* b = req(tb);
  check_2d(a, "matmul");
  check_2d(b, "matmul");
  const int m = a->shape[0], k = a->shape[1];
  const int k2 = b->shape[0], n = b->shape[1];
  if (k != k2) throw ShapeError("matmul: inner dimensions disagree");

  std::vector<double> v(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) {
        acc += a->value[static_cast<std::size_t>(i) * k + t] *
               b->value[static_cast<std::size_t>(t) * n + j];
      }
      v[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
  auto out = make_node({m, n}, std::move(v));
  detail::Node* o = out.get();
  return finish(out, {ta.node(), tb.node()}, [a, b, o, m, k, n] {
    if (a->requires_grad) {
      ensure_grad(a);
      // dA = dC * B^T
      for (int i = 0; i < m; ++i) {
        for (int t = 0; t < k; ++t) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) {
            acc += o->grad[static_cast<std::size_t>(i) * n + j] *
                   b->value[static_cast<std::size_t>(t) * n + j];
          }
          a->grad[static_cast<std::size_t>(i) * k + t] += acc;
        }
      }
    }
    if (b->requires_grad) {
      ensure_grad(b);
      // dB = A^T * dC
      for (int t = 0; t < k; ++t) {
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) {
            acc += a->value[static_cast<std::size_t>(i) * k + t] *
                   o->grad[static_cast<std::size_t>(i) * n + j];
          }
          b->grad[static_cast<std::size_t>(t) * n + j] += acc;
        }
      }
    }
  });
}

Tensor add_bias(const Tensor& tx, const Tensor& tbias) {
  detail::Node* x = req(tx);
  detail::Node* bias = req(tbias);
  check_2d(x, "add_bias");
  if (bias->shape.size() != 1 || bias->shape[0] != x->shape[1]) {
    throw ShapeError("add_bias: bias must be 1-D with length = columns");
  }
  const int r = x->shape[0], c = x->shape[1];
  std::vector<double> v(x->value.size());
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      v[static_cast<std::size_t>(i) * c + j] =
          x->value[static_cast<std::size_t>(i) * c + j] + bias->value[j];
    }
  }
  auto out = make_node(x->shape, std::move(v));
  detail::Node* o = out.get();
  return finish(out, {tx.node(), tbias.node()}, [x, bias, o, r, c] {
    if (x->requires_grad) {
      ensure_grad(x);
      for (std::size_t i = 0; i < o->value.size(); ++i) x->grad[i] += o->grad[i];
    }
    if (bias->requires_grad) {
      ensure_grad(bias);
      for (int j = 0; j < c; ++j) {
        double acc = 0.0;
        for (int i = 0; i < r; ++i) acc += o->grad[static_cast<std::size_t>(i) * c + j];
        bias->grad[j] += acc;
      }
    }
  });
}

namespace {

void check_axis(const detail::Node* x, int axis) {
  check_2d(x, "axis reduction");
  if (axis != 0 && axis != 1) throw IndexError("axis must be 0 or 1");
}

}  // namespace

Tensor sum(const Tensor& tx) {
  detail::Node* x = req(tx);
  double acc = 0.0;
  for (double v : x->value) acc += v;
  auto out = make_node({1}, {acc});
  detail::Node* o = out.get();
  return finish(out, {tx.node()}, [x, o] {
    ensure_grad(x);
    for (double& g : x->grad) g += o->grad[0];
  });
}

Tensor sum(const Tensor& tx, int axis) {
  detail::Node* x = req(tx);
  check_axis(x, axis);
  const int r = x->shape[0], c = x->shape[1];
  const int out_len = axis == 0 ? c : r;
  std::vector<double> v(static_cast<std::size_t>(out_len), 0.0);
  if (axis == 0) {
    for (int j = 0; j < c; ++j) {
      double acc = 0.0;
      for (int i = 0; i < r; ++i) acc += x->value[static_cast<std::size_t>(i) * c + j];
      v[j] = acc;
    }
  } else {
    for (int i = 0; i < r; ++i) {
      double acc = 0.0;
      for (int j = 0; j < c; ++j) acc += x->value[static_cast<std::size_t>(i) * c + j];
      v[i] = acc;
    }
  }
  auto out = make_node({out_len}, std::move(v));
  detail::Node* o = out.get();
  return finish(out, {tx.node()}, [x, o, r, c, axis] {
    ensure_grad(x);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        x->grad[static_cast<std::size_t>(i) * c + j] += o->grad[axis == 0 ? j : i];
      }
    }
  });
}

Tensor mean(const Tensor& tx) {
  detail::Node* x = req(tx);
  const double inv = 1.0 / static_cast<double>(x->value.size());
  double acc = 0.0;
  for (double v : x->value) acc += v;
  auto out = make_node({1}, {acc * inv});
  detail::Node* o = out.get();
  return finish(out, {tx.node()}, [x, o, inv] {
    ensure_grad(x);
    for (double& g : x->grad) g += o->grad[0] * inv;
  });
}

Tensor mean(const Tensor& tx, int axis) {
  detail::Node* x = req(tx);
  check_axis(x, axis);
  const int r = x->shape[0], c = x->shape[1];
  const double inv = 1.0 / static_cast<double>(axis == 0 ? r : c);
  const int out_len = axis == 0 ? c : r;
  std::vector<double> v(static_cast<std::size_t>(out_len), 0.0);
  if (axis == 0) {
    for (int j = 0; j < c; ++j) {
      double acc = 0.0;
      for (int i = 0; i < r; ++i) acc += x->value[static_cast<std::size_t>(i) * c + j];
      v[j] = acc * inv;
    }
  } else {
    for (int i = 0; i < r; ++i) {
      double acc = 0.0;
      for (int j = 0; j < c; ++j) acc += x->value[static_cast<std::size_t>(i) * c + j];
      v[i] = acc * inv;
    }
  }
  auto out = make_node({out_len}, std::move(v));
  detail::Node* o = out.get();
  return finish(out, {tx.node()}, [x, o, r, c, axis, inv] {
    ensure_grad(x);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        x->grad[static_cast<std::size_t>(i) * c + j] += o->grad[axis == 0 ? j : i] * inv;
      }
    }
  });
}

Tensor l2_norm(const Tensor& tx) {
  detail::Node* x = req(tx);
  double acc = 0.0;
  for (double v : x->value) acc += v * v;
  const double norm = std::sqrt(acc);
  auto out = make_node({1}, {norm});
  detail::Node* o = out.get();
  return finish(out, {tx.node()}, [x, o] {
    ensure_grad(x);
    const double norm = o->value[0];
    if (norm == 0.0) return;  // subgradient 0 at the origin
    for (std::size_t i = 0; i < x->value.size(); ++i) {
      x->grad[i] += o->grad[0] * x->value[i] / norm;
    }
  });
}

Tensor l2_norm(const Tensor& tx, int axis) {
  detail::Node* x = req(tx);
  check_axis(x, axis);
  const int r = x->shape[0], c = x->shape[1];
  const int out_len = axis == 0 ? c : r;
  std::vector<double> v(static_cast<std::size_t>(out_len), 0.0);
  for (int t = 0; t < out_len; ++t) {
    double acc = 0.0;
    const int span = axis == 0 ? r : c;
    for (int s = 0; s < span; ++s) {
      const double e = axis == 0 ? x->value[static_cast<std::size_t>(s) * c + t]
                                 : x->value[static_cast<std::size_t>(t) * c + s];
      acc += e * e;
    }
    v[t] = std::sqrt(acc);
  }
  auto out = make_node({out_len}, std::move(v));
  detail::Node* o = out.get();
  return finish(out, {tx.node()}, [x, o, r, c, axis] {
    ensure_grad(x);
    const int out_len = axis == 0 ? c : r;
    const int span = axis == 0 ? r : c;
    for (int t = 0; t < out_len; ++t) {
      const double norm = o->value[t];
      if (norm == 0.0) continue;
      for (int s = 0; s < span; ++s) {
        const std::size_t idx = axis == 0 ? static_cast<std::size_t>(s) * c + t
                                          : static_cast<std::size_t>(t) * c + s;
        x->grad[idx] += o->grad[t] * x->value[idx] / norm;
      }
    }
  });
}

Tensor softmax_rows(const Tensor& tx) {
  detail::Node* x = req(tx);
  check_2d(x, "softmax_rows");
  const int r = x->shape[0], c = x->shape[1];
  std::vector<double> v(x->value.size());
  for (int i = 0; i < r; ++i) {
    const double* row = &x->value[static_cast<std::size_t>(i) * c];
    double m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += std::exp(row[j] - m);
    for (int j = 0; j < c; ++j) {
      v[static_cast<std::size_t>(i) * c + j] = std::exp(row[j] - m) / s;
    }
  }
  auto out = make_node(x->shape, std::move(v));
  detail::Node* o = out.get();
  return finish(out, {tx.node()}, [x, o, r, c] {
    ensure_grad(x);
    for (int i = 0; i < r; ++i) {
      const double* p = &o->value[static_cast<std::size_t>(i) * c];
      const double* g = &o->grad[static_cast<std::size_t>(i) * c];
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += g[j] * p[j];
      for (int j = 0; j < c; ++j) {
        x->grad[static_cast<std::size_t>(i) * c + j] += p[j] * (g[j] - dot);
      }
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& tlogits, const std::vector<int>& labels) {
  detail::Node* x = req(tlogits);
  check_2d(x, "softmax_cross_entropy");
  const int b = x->shape[0], c = x->shape[1];
  if (static_cast<int>(labels.size()) != b) {
    throw ShapeError("softmax_cross_entropy: one label per row required");
  }
  for (int y : labels) {
    if (y < 0 || y >= c) throw IndexError("softmax_cross_entropy: label out of range");
  }
  // Max-subtraction stabilized log-sum-exp.
  std::vector<double> probs(x->value.size());
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* row = &x->value[static_cast<std::size_t>(i) * c];
    double m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += std::exp(row[j] - m);
    const double lse = m + std::log(s);
    loss += lse - row[labels[static_cast<std::size_t>(i)]];
    for (int j = 0; j < c; ++j) {
      probs[static_cast<std::size_t>(i) * c + j] = std::exp(row[j] - m) / s;
    }
  }
  loss /= static_cast<double>(b);
  auto out = make_node({1}, {loss});
  detail::Node* o = out.get();
  return finish(out, {tlogits.node()},
                [x, o, b, c, labels, probs = std::move(probs)] {
                  ensure_grad(x);
                  const double inv = 1.0 / static_cast<double>(b);
                  for (int i = 0; i < b; ++i) {
                    for (int j = 0; j < c; ++j) {
                      const std::size_t idx = static_cast<std::size_t>(i) * c + j;
                      const double onehot =
                          j == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                      x->grad[idx] += o->grad[0] * (probs[idx] - onehot) * inv;
                    }
                  }
                });
}

void backward(const Tensor& root) {
  detail::Node* r = req(root);
  if (r->value.size() != 1) throw ShapeError("backward: root must be a one-element tensor");
  if (!r->requires_grad) return;

  // Gather reachable nodes, then replay in reverse creation order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{r};
  seen.insert(r);
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });

  for (detail::Node* n : order) ensure_grad(n);
  r->grad[0] += 1.0;
  for (detail::Node* n : order) {
    if (n->backprop) n->backprop();
  }
}

}  // namespace msda
