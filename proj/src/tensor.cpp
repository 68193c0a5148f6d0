#include "con2em/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace con2em::ad {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr new_node(Shape shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

[[noreturn]] void dim_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) dim_error(op, "undefined tensor operand");
}

// Wrap an op result. If no parent is tracked the result is a plain leaf value
// with no graph attached.
Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<NodePtr> parents,
               std::function<void(Node&)> backprop) {
  auto n = new_node(std::move(shape), std::move(value));
  bool tracked = false;
  for (const auto& p : parents) {
    if (p && p->requires_grad) tracked = true;
  }
  if (tracked) {
    n->requires_grad = true;
    n->is_leaf = false;
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return Tensor(n);
}

bool scalar_broadcast_ok(const Node& a, const Node& b) {
  return a.shape == b.shape || a.numel() == 1 || b.numel() == 1;
}

// Accumulate g (possibly reduced) into parent's flow for a broadcast-aware
// elementwise op. `weight(i)` gives dout_i/dparent contribution.
void add_flow_elementwise(Node& parent, const Node& self,
                          const std::function<double(std::size_t)>& contrib) {
  if (!parent.requires_grad) return;
  if (parent.numel() == self.numel()) {
    for (std::size_t i = 0; i < self.numel(); ++i) parent.flow[i] += contrib(i);
  } else {
    // parent is the broadcast scalar side
    double acc = 0.0;
    for (std::size_t i = 0; i < self.numel(); ++i) acc += contrib(i);
    parent.flow[0] += acc;
  }
}

double broadcast_at(const Node& n, std::size_t i) {
  return n.numel() == 1 ? n.value[0] : n.value[i];
}

}  // namespace

// ---- Shape helpers ----------------------------------------------------------

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << '}';
  return os.str();
}

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from_data(std::move(shape), {}, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), v);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  if (shape.empty()) {
    throw std::invalid_argument("Tensor: rank-0 shapes are not supported");
  }
  if (data.empty()) data.assign(n, 0.0);
  if (data.size() != n) {
    throw std::invalid_argument("Tensor: data length " +
                                std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto node = new_node(std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

const Shape& Tensor::shape() const {
  if (!n_) throw std::logic_error("Tensor: undefined");
  return n_->shape;
}

std::size_t Tensor::size() const { return n_ ? n_->numel() : 0; }

std::span<const double> Tensor::data() const {
  if (!n_) throw std::logic_error("Tensor: undefined");
  return n_->value;
}

std::span<double> Tensor::mutable_data() {
  if (!n_) throw std::logic_error("Tensor: undefined");
  return n_->value;
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("Tensor::item: tensor has " +
                                std::to_string(size()) + " elements");
  }
  return n_->value[0];
}

double Tensor::at(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("Tensor::at: flat index");
  return n_->value[i];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  const auto& s = shape();
  if (s.size() != 2 || r >= s[0] || c >= s[1]) {
    throw std::out_of_range("Tensor::at(r,c): bad index for " + shape_str(s));
  }
  return n_->value[r * s[1] + c];
}

bool Tensor::requires_grad() const { return n_ && n_->requires_grad; }

bool Tensor::has_grad() const { return n_ && n_->grad_set; }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("Tensor::grad: gradient not set");
  return n_->grad;
}

void Tensor::zero_grad() {
  if (!n_) return;
  n_->grad.assign(n_->numel(), 0.0);
  n_->grad_set = false;
}

Tensor Tensor::detach() const {
  if (!n_) return Tensor();
  return from_data(n_->shape, n_->value, false);
}

// ---- elementwise binary -----------------------------------------------------

namespace {

enum class BinOp { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  check_defined(a, name);
  check_defined(b, name);
  const auto& an = *a.node();
  const auto& bn = *b.node();
  if (!scalar_broadcast_ok(an, bn)) {
    dim_error(name, "shape mismatch " + shape_str(an.shape) + " vs " +
                        shape_str(bn.shape));
  }
  const Shape& out_shape = an.numel() >= bn.numel() ? an.shape : bn.shape;
  const std::size_t n = shape_numel(out_shape);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = broadcast_at(an, i);
    const double y = broadcast_at(bn, i);
    switch (op) {
      case BinOp::Add: out[i] = x + y; break;
      case BinOp::Sub: out[i] = x - y; break;
      case BinOp::Mul: out[i] = x * y; break;
    }
  }
  return make_op(out_shape, std::move(out), {a.node(), b.node()},
                 [op](Node& self) {
                   Node& pa = *self.parents[0];
                   Node& pb = *self.parents[1];
                   switch (op) {
                     case BinOp::Add:
                       add_flow_elementwise(pa, self, [&](std::size_t i) {
                         return self.flow[i];
                       });
                       add_flow_elementwise(pb, self, [&](std::size_t i) {
                         return self.flow[i];
                       });
                       break;
                     case BinOp::Sub:
                       add_flow_elementwise(pa, self, [&](std::size_t i) {
                         return self.flow[i];
                       });
                       add_flow_elementwise(pb, self, [&](std::size_t i) {
                         return -self.flow[i];
                       });
                       break;
                     case BinOp::Mul:
                       add_flow_elementwise(pa, self, [&](std::size_t i) {
                         return self.flow[i] * broadcast_at(pb, i);
                       });
                       add_flow_elementwise(pb, self, [&](std::size_t i) {
                         return self.flow[i] * broadcast_at(pa, i);
                       });
                       break;
                   }
                 });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Mul, "mul"); }

// ---- elementwise unary ------------------------------------------------------

namespace {

// df takes (x, fx) -> local derivative.
Tensor unary_op(const Tensor& t, const char* name,
                const std::function<double(double)>& f,
                const std::function<double(double, double)>& df) {
  check_defined(t, name);
  const auto& tn = *t.node();
  std::vector<double> out(tn.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(tn.value[i]);
  return make_op(tn.shape, std::move(out), {t.node()}, [df](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.numel(); ++i) {
      p.flow[i] += self.flow[i] * df(p.value[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor scale(const Tensor& t, double c) {
  return unary_op(t, "scale", [c](double x) { return c * x; },
                  [c](double, double) { return c; });
}

Tensor neg(const Tensor& t) { return scale(t, -1.0); }

Tensor exp(const Tensor& t) {
  return unary_op(t, "exp", [](double x) { return std::exp(x); },
                  [](double, double fx) { return fx; });
}

Tensor log(const Tensor& t) {
  check_defined(t, "log");
  for (double v : t.data()) {
    if (!(v > 0.0)) throw std::domain_error("log: operand must be > 0");
  }
  return unary_op(t, "log", [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& t) {
  return unary_op(t, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& t) {
  return unary_op(t, "square", [](double x) { return x * x; },
                  [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& t) {
  check_defined(t, "sqrt");
  for (double v : t.data()) {
    if (v < 0.0) throw std::domain_error("sqrt: operand must be >= 0");
  }
  return unary_op(t, "sqrt", [](double x) { return std::sqrt(x); },
                  [](double, double fx) { return 0.5 / fx; });
}

Tensor clamp_min(const Tensor& t, double floor) {
  return unary_op(t, "clamp_min",
                  [floor](double x) { return x > floor ? x : floor; },
                  [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor reshape(const Tensor& t, Shape shape) {
  check_defined(t, "reshape");
  if (shape_numel(shape) != t.size()) {
    dim_error("reshape", "cannot reshape " + shape_str(t.shape()) + " to " +
                             shape_str(shape));
  }
  const auto& tn = *t.node();
  return make_op(std::move(shape), tn.value, {t.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.numel(); ++i) p.flow[i] += self.flow[i];
  });
}

// ---- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2) {
    dim_error("matmul", "operands must be rank-2, got " + shape_str(as) +
                            " and " + shape_str(bs));
  }
  if (as[1] != bs[0]) {
    dim_error("matmul", "inner extents disagree: " + shape_str(as) + " x " +
                            shape_str(bs));
  }
  const std::size_t m = as[0], k = as[1], n = bs[1];
  std::vector<double> out(m * n, 0.0);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        out[i * n + j] += x * bv[p * n + j];
      }
    }
  }
  return make_op({m, n}, std::move(out), {a.node(), b.node()},
                 [m, k, n](Node& self) {
                   Node& pa = *self.parents[0];
                   Node& pb = *self.parents[1];
                   if (pa.requires_grad) {
                     // dA = G * B^T
                     for (std::size_t i = 0; i < m; ++i) {
                       for (std::size_t p = 0; p < k; ++p) {
                         double acc = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           acc += self.flow[i * n + j] * pb.value[p * n + j];
                         }
                         pa.flow[i * k + p] += acc;
                       }
                     }
                   }
                   if (pb.requires_grad) {
                     // dB = A^T * G
                     for (std::size_t p = 0; p < k; ++p) {
                       for (std::size_t j = 0; j < n; ++j) {
                         double acc = 0.0;
                         for (std::size_t i = 0; i < m; ++i) {
                           acc += pa.value[i * k + p] * self.flow[i * n + j];
                         }
                         pb.flow[p * n + j] += acc;
                       }
                     }
                   }
                 });
}

namespace {

void check_rowvec(const Tensor& m, const Tensor& v, const char* name) {
  check_defined(m, name);
  check_defined(v, name);
  if (m.rank() != 2 || v.rank() != 1 || m.shape()[1] != v.shape()[0]) {
    dim_error(name, "expected {r,c} and {c}, got " + shape_str(m.shape()) +
                        " and " + shape_str(v.shape()));
  }
}

}  // namespace

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  check_rowvec(m, v, "add_rowvec");
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  std::vector<double> out(r * c);
  const auto mv = m.data();
  const auto vv = v.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = mv[i * c + j] + vv[j];
  }
  return make_op({r, c}, std::move(out), {m.node(), v.node()},
                 [r, c](Node& self) {
                   Node& pm = *self.parents[0];
                   Node& pv = *self.parents[1];
                   if (pm.requires_grad) {
                     for (std::size_t i = 0; i < r * c; ++i) {
                       pm.flow[i] += self.flow[i];
                     }
                   }
                   if (pv.requires_grad) {
                     for (std::size_t j = 0; j < c; ++j) {
                       double acc = 0.0;
                       for (std::size_t i = 0; i < r; ++i) {
                         acc += self.flow[i * c + j];
                       }
                       pv.flow[j] += acc;
                     }
                   }
                 });
}

Tensor mul_rowvec(const Tensor& m, const Tensor& v) {
  check_rowvec(m, v, "mul_rowvec");
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  std::vector<double> out(r * c);
  const auto mv = m.data();
  const auto vv = v.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = mv[i * c + j] * vv[j];
  }
  return make_op({r, c}, std::move(out), {m.node(), v.node()},
                 [r, c](Node& self) {
                   Node& pm = *self.parents[0];
                   Node& pv = *self.parents[1];
                   if (pm.requires_grad) {
                     for (std::size_t i = 0; i < r; ++i) {
                       for (std::size_t j = 0; j < c; ++j) {
                         pm.flow[i * c + j] += self.flow[i * c + j] * pv.value[j];
                       }
                     }
                   }
                   if (pv.requires_grad) {
                     for (std::size_t j = 0; j < c; ++j) {
                       double acc = 0.0;
                       for (std::size_t i = 0; i < r; ++i) {
                         acc += self.flow[i * c + j] * pm.value[i * c + j];
                       }
                       pv.flow[j] += acc;
                     }
                   }
                 });
}

Tensor row_sums(const Tensor& m) {
  check_defined(m, "row_sums");
  if (m.rank() != 2) {
    dim_error("row_sums", "expected rank-2, got " + shape_str(m.shape()));
  }
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  std::vector<double> out(r, 0.0);
  const auto mv = m.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i] += mv[i * c + j];
  }
  return make_op({r}, std::move(out), {m.node()}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) p.flow[i * c + j] += self.flow[i];
    }
  });
}

Tensor row_select_mean(const Tensor& m, std::span<const std::size_t> idx) {
  check_defined(m, "row_select_mean");
  if (m.rank() != 2) {
    dim_error("row_select_mean", "expected rank-2, got " + shape_str(m.shape()));
  }
  if (idx.empty()) dim_error("row_select_mean", "empty index set");
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  for (auto i : idx) {
    if (i >= r) dim_error("row_select_mean", "row index out of range");
  }
  std::vector<double> out(c, 0.0);
  const auto mv = m.data();
  for (auto i : idx) {
    for (std::size_t j = 0; j < c; ++j) out[j] += mv[i * c + j];
  }
  const double count = static_cast<double>(idx.size());
  for (auto& v : out) v /= count;
  std::vector<std::size_t> saved(idx.begin(), idx.end());
  return make_op({c}, std::move(out), {m.node()},
                 [saved = std::move(saved), c, count](Node& self) {
                   Node& p = *self.parents[0];
                   if (!p.requires_grad) return;
                   for (auto i : saved) {
                     for (std::size_t j = 0; j < c; ++j) {
                       p.flow[i * c + j] += self.flow[j] / count;
                     }
                   }
                 });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) dim_error("concat_rows", "no parts");
  std::size_t cols = 0;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    check_defined(p, "concat_rows");
    const auto& s = p.shape();
    std::size_t c = s.size() == 1 ? s[0] : s[1];
    std::size_t r = s.size() == 1 ? 1 : s[0];
    if (s.size() > 2) dim_error("concat_rows", "parts must be rank 1 or 2");
    if (cols == 0) cols = c;
    if (c != cols) dim_error("concat_rows", "column counts disagree");
    rows += r;
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  std::vector<NodePtr> parents;
  std::vector<std::size_t> row_of;  // starting row of each part
  parents.reserve(parts.size());
  std::size_t at = 0;
  for (const auto& p : parts) {
    const auto pv = p.data();
    out.insert(out.end(), pv.begin(), pv.end());
    parents.push_back(p.node());
    row_of.push_back(at);
    at += p.size() / cols;
  }
  return make_op({rows, cols}, std::move(out), std::move(parents),
                 [row_of, cols](Node& self) {
                   for (std::size_t t = 0; t < self.parents.size(); ++t) {
                     Node& p = *self.parents[t];
                     if (!p.requires_grad) continue;
                     const std::size_t off = row_of[t] * cols;
                     for (std::size_t i = 0; i < p.numel(); ++i) {
                       p.flow[i] += self.flow[off + i];
                     }
                   }
                 });
}

// ---- reductions and losses --------------------------------------------------

Tensor sum(const Tensor& t) {
  check_defined(t, "sum");
  double acc = 0.0;
  for (double v : t.data()) acc += v;
  return make_op({1}, {acc}, {t.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (auto& f : p.flow) f += self.flow[0];
  });
}

Tensor mean(const Tensor& t) {
  check_defined(t, "mean");
  return scale(sum(t), 1.0 / static_cast<double>(t.size()));
}

Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& targets) {
  check_defined(logits, "softmax_cross_entropy");
  check_defined(targets, "softmax_cross_entropy");
  if (logits.rank() != 2 || targets.shape() != logits.shape()) {
    dim_error("softmax_cross_entropy",
              "logits and targets must share a rank-2 shape, got " +
                  shape_str(logits.shape()) + " and " +
                  shape_str(targets.shape()));
  }
  const std::size_t b = logits.shape()[0], c = logits.shape()[1];
  const auto tv = targets.data();
  for (std::size_t i = 0; i < b; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double t = tv[i * c + j];
      if (t < -1e-12) {
        throw std::invalid_argument(
            "softmax_cross_entropy: negative target entry");
      }
      row += t;
    }
    if (std::abs(row - 1.0) > 1e-9) {
      throw std::invalid_argument(
          "softmax_cross_entropy: target row does not sum to 1");
    }
  }
  const auto lv = logits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double mx = lv[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lv[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(lv[i * c + j] - mx);
    const double lse = mx + std::log(z);
    double dot = 0.0;
    for (std::size_t j = 0; j < c; ++j) dot += tv[i * c + j] * lv[i * c + j];
    total += lse - dot;
  }
  total /= static_cast<double>(b);
  return make_op(
      {1}, {total}, {logits.node(), targets.node()}, [b, c](Node& self) {
        Node& pl = *self.parents[0];
        const Node& pt = *self.parents[1];
        if (!pl.requires_grad) return;
        const double g = self.flow[0] / static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) {
          double mx = pl.value[i * c];
          for (std::size_t j = 1; j < c; ++j) {
            mx = std::max(mx, pl.value[i * c + j]);
          }
          double z = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            z += std::exp(pl.value[i * c + j] - mx);
          }
          for (std::size_t j = 0; j < c; ++j) {
            const double sm = std::exp(pl.value[i * c + j] - mx) / z;
            pl.flow[i * c + j] += g * (sm - pt.value[i * c + j]);
          }
        }
      });
}

// ---- backward ---------------------------------------------------------------

void backward(const Tensor& loss) {
  check_defined(loss, "backward");
  if (!loss.is_scalar()) {
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Collect nodes reachable through tracked parents.
  std::vector<Node*> order;
  std::vector<Node*> stack{loss.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (n->visited) continue;
    n->visited = true;
    n->flow.assign(n->numel(), 0.0);
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p && p->requires_grad && !p->visited) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->id > b->id; });

  loss.node()->flow[0] = 1.0;
  for (Node* n : order) {
    if (n->backprop) n->backprop(*n);
  }
  for (Node* n : order) {
    if (n->is_leaf && n->requires_grad) {
      if (n->grad.size() != n->numel()) n->grad.assign(n->numel(), 0.0);
      for (std::size_t i = 0; i < n->numel(); ++i) n->grad[i] += n->flow[i];
      n->grad_set = true;
    }
    n->flow.clear();
    n->visited = false;
  }
}

// ---- plain helpers ----------------------------------------------------------

Tensor onehot_rows(std::span<const int> labels, int n_classes) {
  if (n_classes <= 0) {
    throw std::invalid_argument("onehot_rows: n_classes must be positive");
  }
  std::vector<double> out(labels.size() * static_cast<std::size_t>(n_classes),
                          0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int k = labels[i];
    if (k < 0 || k >= n_classes) {
      throw std::invalid_argument("onehot_rows: label out of range");
    }
    out[i * static_cast<std::size_t>(n_classes) + static_cast<std::size_t>(k)] =
        1.0;
  }
  return Tensor::from_data({labels.size(), static_cast<std::size_t>(n_classes)},
                           std::move(out));
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("argmax_rows: expected rank-2 logits");
  }
  const std::size_t b = logits.shape()[0], c = logits.shape()[1];
  const auto lv = logits.data();
  std::vector<int> out(b, 0);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (lv[i * c + j] > lv[i * c + best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace con2em::ad
