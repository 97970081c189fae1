#pragma once

// Dense double-precision tensors with define-by-run reverse-mode autodiff.
//
// Every operation whose inputs require gradients appends an entry to the
// calling thread's tape. `backward()` walks that tape in exact reverse order,
// accumulates gradients into every reachable tensor and clears the tape.
// Parameters (leaves created with requires_grad) keep accumulating gradients
// across backward calls until `zero_grad()`.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bvqa {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor();

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t dim(std::size_t axis) const;

  std::span<const double> data() const { return node_->value; }
  // Direct write access for optimizers and initializers; never use on a
  // tensor that is an input of a pending tape entry.
  std::span<double> mutable_data() { return node_->value; }

  double item() const;
  double operator[](std::size_t flat_index) const { return node_->value[flat_index]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  // Allocates a zero gradient if none exists yet.
  std::span<double> mutable_grad();
  std::vector<double> grad_or_zeros() const;
  void zero_grad() { node_->grad.clear(); }

  // Runs reverse-mode differentiation from this scalar.
  void backward() const;

  // Same values, cut from the tape.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Extension point for composite operations with hand-written adjoints.
  // `backward_fn` receives the output gradient and must accumulate into the
  // gradients of inputs that require them (use `detail::Node::ensure_grad`).
  using BackwardFn = std::function<void(std::span<const double> out_grad,
                                        std::span<detail::Node* const> inputs)>;
  static Tensor make_result(const char* op_name, Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs, BackwardFn backward_fn);

  detail::Node& node() const { return *node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Per-thread operation record.
class GradTape {
 public:
  static std::size_t size();
  static void clear();
};

// Disables recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Elementwise arithmetic. Shapes must be equal, or one side holds one element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softplus(const Tensor& x);
// Standard Gaussian CDF.
Tensor normal_cdf(const Tensor& x);
// max(x, c) with the subgradient at the kink going to the constant.
Tensor maximum(const Tensor& x, double c);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& x);
Tensor operator+(const Tensor& a, double b);
Tensor operator+(double a, const Tensor& b);
Tensor operator-(const Tensor& a, double b);
Tensor operator-(double a, const Tensor& b);
Tensor operator*(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(const Tensor& a, double b);

// [m x k] . [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// x [n x in] . weight [in x out] + bias [out], bias added to every row.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Population standard deviation (divides by N).
Tensor std_dev(const Tensor& x);
Tensor min(const Tensor& x);
std::size_t argmin(const Tensor& x);

// Axis reductions drop the reduced axis.
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);
Tensor std_dev(const Tensor& x, std::size_t axis);
struct MinResult {
  Tensor values;
  std::vector<std::size_t> indices;
};
MinResult min(const Tensor& x, std::size_t axis);

Tensor reshape(const Tensor& x, Shape shape);
// Rows [begin, end) along axis 0.
Tensor slice(const Tensor& x, std::size_t begin, std::size_t end);
Tensor row(const Tensor& x, std::size_t index);
Tensor element(const Tensor& x, std::size_t flat_index);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Single-element tensors into a vector.
Tensor stack(const std::vector<Tensor>& scalars);

}  // namespace bvqa
