// semiasr/nn/graph.hpp
//
// Tape-based reverse-mode differentiation. A Graph records every op applied to
// its variables in creation order; backward() walks the tape in reverse, which
// fixes the accumulation order of every gradient and keeps results bit-identical
// between runs.
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semiasr/nn/params.hpp"
#include "semiasr/nn/tensor.hpp"

namespace semiasr::nn {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return graph != nullptr && id >= 0; }
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  explicit Graph(ParameterSet* params = nullptr) : params_(params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf holding data; gradients are tracked only when `requires_grad`.
  Var input(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return input(std::move(value), false); }
  /// Leaf bound to a named parameter. Repeated calls within one graph return the same node.
  Var param(const std::string& name);

  /// Low-level node construction used by ops defined outside this header.
  Var make_node(Tensor value, std::vector<int> inputs, BackwardFn backward, const char* op,
                bool differentiable = true);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& value(int id) const { return nodes_[id].value; }
  /// Gradient buffer of node `id`, allocated (zeroed) on first use.
  Tensor& grad(int id);
  const Tensor& grad(Var v) const;
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const std::vector<int>& inputs(int id) const { return nodes_[id].inputs; }
  const char* op_name(int id) const { return nodes_[id].op; }
  std::size_t size() const { return nodes_.size(); }

  /// Back-propagates from a scalar loss and adds parameter gradients into the
  /// bound ParameterSet. Throws ShapeError for a non-scalar loss and
  /// NonDifferentiableError when the gradient would pass through a hard op.
  void backward(Var loss);

  /// When enabled (the default) every op output is checked for NaN/Inf and a
  /// NonFiniteError naming the op is thrown.
  void set_check_finite(bool on) { check_finite_ = on; }

  ParameterSet* params() { return params_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> inputs;
    BackwardFn backward;
    const char* op = "";
    bool requires_grad = false;
    bool differentiable = true;
    Parameter* param = nullptr;
  };

  ParameterSet* params_ = nullptr;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_nodes_;
  bool check_finite_ = true;
};

// Ops. Every op checks shapes and throws ShapeError naming itself and the shapes.

Var matmul(Var a, Var b);          ///< [m,k] x [k,n]
Var matmul_nt(Var a, Var b);       ///< [m,k] x [n,k]^T
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);             ///< elementwise
Var add_row(Var a, Var row);       ///< broadcast a [1,n] row over every row of a
Var mul_row(Var a, Var row);       ///< broadcast-multiply by a [1,n] row
Var add_const(Var a, const Tensor& c);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var relu(Var a);
Var gelu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);                    ///< natural log; non-positive inputs produce a NonFiniteError

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);

/// 1-D convolution over time. x: [T, Cin]; w: [k*Cin, Cout] with rows ordered
/// (tap, in-channel); b: [1, Cout]. No padding: T_out = (T - k) / stride + 1.
Var conv1d(Var x, Var w, Var b, std::size_t kernel, std::size_t stride);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var gather_rows(Var a, const std::vector<std::size_t>& index);
Var reshape(Var a, std::size_t rows, std::size_t cols);

Var sum(Var a);                    ///< scalar
Var mean(Var a);                   ///< scalar
Var sum_rows(Var a);               ///< [n,c] -> [1,c]
Var mean_rows(Var a);              ///< [n,c] -> [1,c]
Var sum_cols(Var a);               ///< [n,c] -> [n,1]

/// Row-wise cosine similarity of a and b ([n,d] each) -> [n,1]. Zero-norm rows throw.
Var cosine_rows(Var a, Var b);
/// out[i] = a[i, index[i]] -> [n,1]
Var pick(Var a, const std::vector<std::size_t>& index);
/// Rows with mask[i] set are replaced by `row` ([1,d]); gradient flows to both.
Var replace_rows(Var x, const std::vector<bool>& mask, Var row);
/// Forward value `hard`, gradient passed unchanged to `soft` (straight-through estimator).
Var straight_through(const Tensor& hard, Var soft);
/// One-hot of the row-wise argmax. Has no derivative; back-propagating through it throws.
Var hard_argmax_rows(Var a);

}  // namespace semiasr::nn
