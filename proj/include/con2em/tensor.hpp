#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace con2em::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

// One recorded operation (or leaf) on the tape. Nodes form a DAG through
// `parents`; the monotone `id` is the creation order, so sorting reachable
// nodes by descending id yields the reverse-topological order that backward()
// walks exactly once per node.
struct Node {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  bool is_leaf = true;

  // Persistent gradient buffer. Only leaves accumulate across backward calls.
  std::vector<double> grad;
  bool grad_set = false;

  // Scratch used during a single backward pass.
  std::vector<double> flow;
  bool visited = false;

  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->flow and adds each parent's contribution into parent->flow.
  std::function<void(Node&)> backprop;

  std::size_t numel() const { return value.size(); }
};

}  // namespace detail

// Dense row-major array of 64-bit reals, the currency of all differentiable
// computation. Copying a Tensor is a cheap handle copy; ops that track
// gradients attach the result to the tape formed by its operands.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  bool is_scalar() const { return defined() && size() == 1; }

  std::span<const double> data() const;
  // Direct value access, used by optimizers and loaders on leaves.
  std::span<double> mutable_data();

  double item() const;                       // requires numel == 1
  double at(std::size_t i) const;            // flat index
  double at(std::size_t r, std::size_t c) const;  // rank-2 only

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;      // throws if never set
  void zero_grad();

  // Leaf copy of the value with no graph attached and no gradient tracking.
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return n_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> n_;
};

// ---- elementwise and structural ops ----------------------------------------
//
// Binary elementwise ops require equal shapes, or one operand with a single
// element which is broadcast (scalar-vs-tensor; no other broadcasting).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& t, double c);     // c * t
Tensor neg(const Tensor& t);

Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);                 // domain: strictly positive
Tensor relu(const Tensor& t);
Tensor square(const Tensor& t);
Tensor sqrt(const Tensor& t);                // domain: non-negative
Tensor clamp_min(const Tensor& t, double floor);

Tensor reshape(const Tensor& t, Shape shape);  // same numel; gradient is identity

// ---- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // {m,k} x {k,n} -> {m,n}

// out[i,j] = m[i,j] + v[j] (resp. * v[j]); m is {r,c}, v is {c}.
Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor mul_rowvec(const Tensor& m, const Tensor& v);

Tensor row_sums(const Tensor& m);            // {r,c} -> {r}

// Mean of the selected rows of m: {r,c} -> {c}. Gradient scatters g/|idx|
// back onto the selected rows, so per-cell aggregation stays differentiable.
Tensor row_select_mean(const Tensor& m, std::span<const std::size_t> idx);

// Stack parts vertically into one matrix. Each part is either {c} (one row)
// or {r_i,c}; all column counts must agree.
Tensor concat_rows(std::span<const Tensor> parts);

// ---- reductions and losses --------------------------------------------------

Tensor sum(const Tensor& t);                 // -> {1}
Tensor mean(const Tensor& t);                // -> {1}

// Mean over rows of -sum_c target[c] * log softmax(logits)[c], computed with
// a log-sum-exp stabilizer. Targets are soft labels: each row must be
// non-negative and sum to 1. Gradients do not propagate into targets.
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& targets);

// ---- backward ---------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Every tracked leaf reachable from
// the loss accumulates dLoss/dLeaf into its grad buffer; repeated calls
// accumulate until zero_grad().
void backward(const Tensor& loss);

// ---- plain helpers (no gradient tracking) -----------------------------------

Tensor onehot_rows(std::span<const int> labels, int n_classes);
std::vector<int> argmax_rows(const Tensor& logits);  // ties -> lowest index

}  // namespace con2em::ad
