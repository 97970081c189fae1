#include "bvqa/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "bvqa/errors.hpp"

namespace bvqa {

using detail::Node;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

struct TapeEntry {
  const char* op_name;
  std::shared_ptr<Node> output;
  std::vector<std::shared_ptr<Node>> inputs;
  Tensor::BackwardFn backward_fn;
};

struct Tape {
  std::vector<TapeEntry> entries;
  bool enabled = true;
};

Tape& tape() {
  thread_local Tape instance;
  return instance;
}

void check_finite(const char* op_name, std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite ") + what + " in " + op_name);
    }
  }
}

std::string describe(const char* op_name, const Shape& a, const Shape& b) {
  std::ostringstream os;
  os << op_name << ": incompatible shapes " << shape_str(a) << " and " << shape_str(b);
  return os.str();
}

// How the two operands of a binary op line up.
enum class Pairing { kEqual, kScalarA, kScalarB };

Pairing pair_shapes(const char* op_name, const Tensor& a, const Tensor& b, Shape& out_shape) {
  if (a.shape() == b.shape()) {
    out_shape = a.shape();
    return Pairing::kEqual;
  }
  if (a.numel() == 1 && b.numel() == 1) {
    out_shape = a.rank() >= b.rank() ? a.shape() : b.shape();
    return Pairing::kEqual;
  }
  if (a.numel() == 1) {
    out_shape = b.shape();
    return Pairing::kScalarA;
  }
  if (b.numel() == 1) {
    out_shape = a.shape();
    return Pairing::kScalarB;
  }
  throw std::invalid_argument(describe(op_name, a.shape(), b.shape()));
}

// Binary elementwise op with local partials d(out)/da and d(out)/db.
template <typename Fwd, typename Da, typename Db>
Tensor binary(const char* op_name, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
  Shape shape;
  const Pairing pairing = pair_shapes(op_name, a, b, shape);
  const std::size_t n = shape_numel(shape);
  auto ia = [pairing](std::size_t i) { return pairing == Pairing::kScalarA ? 0 : i; };
  auto ib = [pairing](std::size_t i) { return pairing == Pairing::kScalarB ? 0 : i; };
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[ia(i)], bv[ib(i)]);
  return Tensor::make_result(
      op_name, shape, std::move(out), {a, b},
      [n, ia, ib, da, db](std::span<const double> g, std::span<Node* const> in) {
        Node* na = in[0];
        Node* nb = in[1];
        if (na->requires_grad) {
          na->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            na->grad[ia(i)] += g[i] * da(na->value[ia(i)], nb->value[ib(i)]);
          }
        }
        if (nb->requires_grad) {
          nb->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            nb->grad[ib(i)] += g[i] * db(na->value[ia(i)], nb->value[ib(i)]);
          }
        }
      });
}

// Unary elementwise op; the local derivative sees both input and output.
template <typename Fwd, typename Deriv>
Tensor unary(const char* op_name, const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  auto out_copy = out;
  return Tensor::make_result(
      op_name, x.shape(), std::move(out), {x},
      [deriv, out_copy = std::move(out_copy)](std::span<const double> g,
                                              std::span<Node* const> in) {
        Node* nx = in[0];
        if (!nx->requires_grad) return;
        nx->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          nx->grad[i] += g[i] * deriv(nx->value[i], out_copy[i]);
        }
      });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Splits a shape around `axis` into (outer, axis length, inner).
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const char* op_name, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw std::invalid_argument(std::string(op_name) + ": axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  if (s.length == 0) throw std::invalid_argument(std::string(op_name) + ": empty axis");
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out = shape;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  return out;
}

void require_nonempty(const char* op_name, const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument(std::string(op_name) + ": empty tensor");
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : node_(std::make_shared<Node>()) { node_->value.assign(1, 0.0); }

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("Tensor::from: shape " + shape_str(shape) + " holds " +
                                std::to_string(shape_numel(shape)) + " elements, got " +
                                std::to_string(values.size()));
  }
  check_finite("Tensor::from", values, "value");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({n}, std::move(values), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return shape()[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (rank() != 2) throw std::invalid_argument("at(row, col) on non-matrix " + shape_str(shape()));
  return node_->value.at(r * shape()[1] + c);
}

std::vector<double> Tensor::grad_or_zeros() const {
  if (has_grad()) return node_->grad;
  return std::vector<double>(numel(), 0.0);
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

Tensor Tensor::make_result(const char* op_name, Shape shape, std::vector<double> values,
                           std::vector<Tensor> inputs, BackwardFn backward_fn) {
  check_finite(op_name, values, "value");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  Tape& t = tape();
  const bool any_grad = std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor& in) { return in.requires_grad(); });
  if (t.enabled && any_grad) {
    node->requires_grad = true;
    TapeEntry entry{op_name, node, {}, std::move(backward_fn)};
    entry.inputs.reserve(inputs.size());
    for (const Tensor& in : inputs) entry.inputs.push_back(in.node_);
    t.entries.push_back(std::move(entry));
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got shape " + shape_str(shape()));
  }
  Tape& t = tape();
  auto& entries = t.entries;
  std::ptrdiff_t start = -1;
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(entries.size()) - 1; i >= 0; --i) {
    if (entries[static_cast<std::size_t>(i)].output == node_) {
      start = i;
      break;
    }
  }
  if (start < 0) {
    if (!node_->requires_grad) {
      throw std::logic_error("backward(): loss is not on the tape and does not require grad");
    }
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    entries.clear();
    return;
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;

  struct ClearOnExit {
    std::vector<TapeEntry>& entries;
    ~ClearOnExit() { entries.clear(); }
  } clear_on_exit{entries};
  std::vector<Node*> inputs;
  for (std::ptrdiff_t i = start; i >= 0; --i) {
    TapeEntry& e = entries[static_cast<std::size_t>(i)];
    if (e.output->grad.empty()) continue;
    inputs.clear();
    for (auto& in : e.inputs) inputs.push_back(in.get());
    e.backward_fn(e.output->grad, inputs);
    for (Node* in : inputs) {
      if (in->requires_grad) check_finite(e.op_name, in->grad, "gradient");
    }
  }
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

std::size_t GradTape::size() { return tape().entries.size(); }

void GradTape::clear() { tape().entries.clear(); }

NoGradGuard::NoGradGuard() : previous_(tape().enabled) { tape().enabled = false; }

NoGradGuard::~NoGradGuard() { tape().enabled = previous_; }

bool grad_enabled() { return tape().enabled; }

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data()) {
    if (v == 0.0) throw NumericError("div: division by zero");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& x) {
  return unary(
      "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw NumericError("log: non-positive argument " + std::to_string(v));
  }
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) throw NumericError("sqrt: negative argument " + std::to_string(v));
  }
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      "softplus", x,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) { return stable_sigmoid(v); });
}

Tensor normal_cdf(const Tensor& x) {
  return unary(
      "normal_cdf", x, [](double v) { return 0.5 * std::erfc(-v / std::numbers::sqrt2); },
      [](double v, double) {
        return std::exp(-0.5 * v * v) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      });
}

Tensor maximum(const Tensor& x, double c) {
  return unary(
      "maximum", x, [c](double v) { return v > c ? v : c; },
      [c](double v, double) { return v > c ? 1.0 : 0.0; });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator-(const Tensor& x) { return neg(x); }
Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor operator+(double a, const Tensor& b) { return add(Tensor::scalar(a), b); }
Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }

// ---------------------------------------------------------------------------
// Matrix products

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument(describe("matmul", a.shape(), b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(m * n));
  MatMap(out.data(), m, n).noalias() =
      ConstMatMap(a.data().data(), m, k) * ConstMatMap(b.data().data(), k, n);
  return Tensor::make_result(
      "matmul", {a.dim(0), b.dim(1)}, std::move(out), {a, b},
      [m, k, n](std::span<const double> g, std::span<Node* const> in) {
        ConstMatMap gm(g.data(), m, n);
        Node* na = in[0];
        Node* nb = in[1];
        if (na->requires_grad) {
          na->ensure_grad();
          MatMap(na->grad.data(), m, k).noalias() += gm * ConstMatMap(nb->value.data(), k, n).transpose();
        }
        if (nb->requires_grad) {
          nb->ensure_grad();
          MatMap(nb->grad.data(), k, n).noalias() += ConstMatMap(na->value.data(), m, k).transpose() * gm;
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(0)) {
    throw std::invalid_argument(describe("linear", x.shape(), weight.shape()));
  }
  if (bias.numel() != weight.dim(1)) {
    throw std::invalid_argument(describe("linear(bias)", weight.shape(), bias.shape()));
  }
  const auto m = static_cast<Eigen::Index>(x.dim(0));
  const auto k = static_cast<Eigen::Index>(x.dim(1));
  const auto n = static_cast<Eigen::Index>(weight.dim(1));
  std::vector<double> out(static_cast<std::size_t>(m * n));
  MatMap om(out.data(), m, n);
  om.noalias() = ConstMatMap(x.data().data(), m, k) * ConstMatMap(weight.data().data(), k, n);
  om.rowwise() += ConstMatMap(bias.data().data(), 1, n).row(0);
  return Tensor::make_result(
      "linear", {x.dim(0), weight.dim(1)}, std::move(out), {x, weight, bias},
      [m, k, n](std::span<const double> g, std::span<Node* const> in) {
        ConstMatMap gm(g.data(), m, n);
        Node* nx = in[0];
        Node* nw = in[1];
        Node* nb = in[2];
        if (nx->requires_grad) {
          nx->ensure_grad();
          MatMap(nx->grad.data(), m, k).noalias() += gm * ConstMatMap(nw->value.data(), k, n).transpose();
        }
        if (nw->requires_grad) {
          nw->ensure_grad();
          MatMap(nw->grad.data(), k, n).noalias() += ConstMatMap(nx->value.data(), m, k).transpose() * gm;
        }
        if (nb->requires_grad) {
          nb->ensure_grad();
          MatMap(nb->grad.data(), 1, n) += gm.colwise().sum();
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  require_nonempty("sum", x);
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_result("sum", {}, {s}, {x},
                             [](std::span<const double> g, std::span<Node* const> in) {
                               Node* nx = in[0];
                               if (!nx->requires_grad) return;
                               nx->ensure_grad();
                               for (double& v : nx->grad) v += g[0];
                             });
}

Tensor mean(const Tensor& x) {
  require_nonempty("mean", x);
  const double n = static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_result("mean", {}, {s / n}, {x},
                             [n](std::span<const double> g, std::span<Node* const> in) {
                               Node* nx = in[0];
                               if (!nx->requires_grad) return;
                               nx->ensure_grad();
                               for (double& v : nx->grad) v += g[0] / n;
                             });
}

Tensor std_dev(const Tensor& x) {
  require_nonempty("std_dev", x);
  const auto xv = x.data();
  const double n = static_cast<double>(xv.size());
  double mu = 0.0;
  for (double v : xv) mu += v;
  mu /= n;
  double ss = 0.0;
  for (double v : xv) ss += (v - mu) * (v - mu);
  const double sd = std::sqrt(ss / n);
  return Tensor::make_result("std_dev", {}, {sd}, {x},
                             [n, mu, sd](std::span<const double> g, std::span<Node* const> in) {
                               Node* nx = in[0];
                               if (!nx->requires_grad) return;
                               if (sd == 0.0) throw NumericError("std_dev: gradient undefined at zero spread");
                               nx->ensure_grad();
                               for (std::size_t i = 0; i < nx->value.size(); ++i) {
                                 nx->grad[i] += g[0] * (nx->value[i] - mu) / (n * sd);
                               }
                             });
}

std::size_t argmin(const Tensor& x) {
  require_nonempty("argmin", x);
  const auto xv = x.data();
  // std::min_element returns the first minimum.
  return static_cast<std::size_t>(std::min_element(xv.begin(), xv.end()) - xv.begin());
}

Tensor min(const Tensor& x) {
  const std::size_t idx = argmin(x);
  return Tensor::make_result("min", {}, {x[idx]}, {x},
                             [idx](std::span<const double> g, std::span<Node* const> in) {
                               Node* nx = in[0];
                               if (!nx->requires_grad) return;
                               nx->ensure_grad();
                               nx->grad[idx] += g[0];
                             });
}

Tensor sum(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis("sum", x.shape(), axis);
  const auto xv = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t a = 0; a < s.length; ++a)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += xv[(o * s.length + a) * s.inner + i];
  return Tensor::make_result("sum(axis)", drop_axis(x.shape(), axis), std::move(out), {x},
                             [s](std::span<const double> g, std::span<Node* const> in) {
                               Node* nx = in[0];
                               if (!nx->requires_grad) return;
                               nx->ensure_grad();
                               for (std::size_t o = 0; o < s.outer; ++o)
                                 for (std::size_t a = 0; a < s.length; ++a)
                                   for (std::size_t i = 0; i < s.inner; ++i)
                                     nx->grad[(o * s.length + a) * s.inner + i] += g[o * s.inner + i];
                             });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis("mean", x.shape(), axis);
  return sum(x, axis) / static_cast<double>(s.length);
}

Tensor std_dev(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis("std_dev", x.shape(), axis);
  const auto xv = x.data();
  const double n = static_cast<double>(s.length);
  std::vector<double> mu(s.outer * s.inner, 0.0);
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t a = 0; a < s.length; ++a)
      for (std::size_t i = 0; i < s.inner; ++i) mu[o * s.inner + i] += xv[(o * s.length + a) * s.inner + i];
  for (double& m : mu) m /= n;
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t a = 0; a < s.length; ++a)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double d = xv[(o * s.length + a) * s.inner + i] - mu[o * s.inner + i];
        out[o * s.inner + i] += d * d;
      }
  for (double& v : out) v = std::sqrt(v / n);
  auto sd = out;
  return Tensor::make_result(
      "std_dev(axis)", drop_axis(x.shape(), axis), std::move(out), {x},
      [s, n, mu = std::move(mu), sd = std::move(sd)](std::span<const double> g, std::span<Node* const> in) {
        Node* nx = in[0];
        if (!nx->requires_grad) return;
        nx->ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t a = 0; a < s.length; ++a)
            for (std::size_t i = 0; i < s.inner; ++i) {
              const std::size_t r = o * s.inner + i;
              if (sd[r] == 0.0) throw NumericError("std_dev(axis): gradient undefined at zero spread");
              const std::size_t f = (o * s.length + a) * s.inner + i;
              nx->grad[f] += g[r] * (nx->value[f] - mu[r]) / (n * sd[r]);
            }
      });
}

MinResult min(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis("min", x.shape(), axis);
  const auto xv = x.data();
  std::vector<double> out(s.outer * s.inner);
  std::vector<std::size_t> idx(s.outer * s.inner, 0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = 0;
      double best_v = xv[(o * s.length) * s.inner + i];
      for (std::size_t a = 1; a < s.length; ++a) {
        const double v = xv[(o * s.length + a) * s.inner + i];
        if (v < best_v) {
          best_v = v;
          best = a;
        }
      }
      out[o * s.inner + i] = best_v;
      idx[o * s.inner + i] = best;
    }
  Tensor values = Tensor::make_result(
      "min(axis)", drop_axis(x.shape(), axis), std::move(out), {x},
      [s, idx](std::span<const double> g, std::span<Node* const> in) {
        Node* nx = in[0];
        if (!nx->requires_grad) return;
        nx->ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t r = o * s.inner + i;
            nx->grad[(o * s.length + idx[r]) * s.inner + i] += g[r];
          }
      });
  return {values, std::move(idx)};
}

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument(describe("reshape", x.shape(), shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result("reshape", std::move(shape), std::move(out), {x},
                             [](std::span<const double> g, std::span<Node* const> in) {
                               Node* nx = in[0];
                               if (!nx->requires_grad) return;
                               nx->ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i) nx->grad[i] += g[i];
                             });
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin >= end || end > x.dim(0)) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") invalid for shape " + shape_str(x.shape()));
  }
  const std::size_t stride = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  const auto xv = x.data();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                          xv.begin() + static_cast<std::ptrdiff_t>(end * stride));
  const std::size_t offset = begin * stride;
  return Tensor::make_result("slice", std::move(shape), std::move(out), {x},
                             [offset](std::span<const double> g, std::span<Node* const> in) {
                               Node* nx = in[0];
                               if (!nx->requires_grad) return;
                               nx->ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i) nx->grad[offset + i] += g[i];
                             });
}

Tensor row(const Tensor& x, std::size_t index) { return slice(x, index, index + 1); }

Tensor element(const Tensor& x, std::size_t flat_index) {
  if (flat_index >= x.numel()) {
    throw std::out_of_range("element: index " + std::to_string(flat_index) + " out of range for " +
                            shape_str(x.shape()));
  }
  return Tensor::make_result("element", {}, {x[flat_index]}, {x},
                             [flat_index](std::span<const double> g, std::span<Node* const> in) {
                               Node* nx = in[0];
                               if (!nx->requires_grad) return;
                               nx->ensure_grad();
                               nx->grad[flat_index] += g[0];
                             });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw std::invalid_argument("concat: axis out of range for " + shape_str(first));
  Shape shape = first;
  shape[axis] = 0;
  for (const Tensor& p : parts) {
    Shape a = p.shape();
    Shape b = first;
    if (a.size() != b.size()) throw std::invalid_argument(describe("concat", first, p.shape()));
    a[axis] = b[axis] = 0;
    if (a != b) throw std::invalid_argument(describe("concat", first, p.shape()));
    shape[axis] += p.dim(axis);
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  const std::size_t out_len = shape[axis];

  std::vector<double> out(shape_numel(shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.dim(axis);
    const auto pv = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * len * inner), len * inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * out_len + off) * inner));
    off += len;
  }
  std::vector<std::size_t> lengths;
  for (const Tensor& p : parts) lengths.push_back(p.dim(axis));
  return Tensor::make_result(
      "concat", std::move(shape), std::move(out), parts,
      [outer, inner, out_len, offsets, lengths](std::span<const double> g, std::span<Node* const> in) {
        for (std::size_t k = 0; k < in.size(); ++k) {
          Node* np = in[k];
          if (!np->requires_grad) continue;
          np->ensure_grad();
          const std::size_t len = lengths[k];
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < len * inner; ++j)
              np->grad[o * len * inner + j] += g[(o * out_len + offsets[k]) * inner + j];
        }
      });
}

Tensor stack(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("stack: no inputs");
  std::vector<double> out;
  out.reserve(scalars.size());
  for (const Tensor& s : scalars) {
    if (s.numel() != 1) throw std::invalid_argument("stack: expected single elements, got " + shape_str(s.shape()));
    out.push_back(s[0]);
  }
  return Tensor::make_result("stack", {scalars.size()}, std::move(out), scalars,
                             [](std::span<const double> g, std::span<Node* const> in) {
                               for (std::size_t k = 0; k < in.size(); ++k) {
                                 if (!in[k]->requires_grad) continue;
                                 in[k]->ensure_grad();
                                 in[k]->grad[0] += g[k];
                               }
                             });
}

}  // namespace bvqa
