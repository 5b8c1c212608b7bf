#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace msda {

namespace detail {

// One recorded operation result. Creation order (seq) is a topological
// order of the graph: inputs always precede consumers.
struct Node {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily by backward()
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backprop;  // accumulates this->grad into parents
};

}  // namespace detail

// Dense row-major 64-bit float tensor with reverse-mode autodiff.
// Copies share the underlying node (shallow handle semantics).
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor matrix(int rows, int cols, std::vector<double> data,
                       bool requires_grad = false);
  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const;
  int ndim() const;
  std::size_t numel() const;
  bool is_scalar() const { return numel() == 1; }
  int rows() const;  // 2-D only
  int cols() const;

  const std::vector<double>& data() const;
  std::vector<double>& mutable_data();  // in-place update of leaf values
  double item() const;                  // value of a one-element tensor
  double at(int i, int j) const;

  bool requires_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  const std::shared_ptr<detail::Node>& node() const { return n_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> n_;
};

// --- elementwise ops (equal shapes or one-element broadcast) ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor pow_k(const Tensor& x, int k);  // integer power, k >= 0
Tensor log(const Tensor& x);           // domain error on x <= 0
Tensor exp(const Tensor& x);

// --- matrix ops ---
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& x, const Tensor& bias);  // row-broadcast [b×d]+[d]

// --- reductions (fixed left-to-right accumulation order) ---
Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, int axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, int axis);
Tensor l2_norm(const Tensor& x);           // gradient defined 0 at ||x|| = 0
Tensor l2_norm(const Tensor& x, int axis);

// --- classification ops ---
Tensor softmax_rows(const Tensor& logits);
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Reverse pass from a one-element root; visits each reachable node once in
// reverse creation order and accumulates into existing leaf gradients.
void backward(const Tensor& root);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& x) { return mul(Tensor::scalar(c), x); }
inline Tensor operator*(const Tensor& x, double c) { return mul(x, Tensor::scalar(c)); }

// Deterministic integer power by repeated multiplication.
double ipow(double x, int k);

}  // namespace msda
