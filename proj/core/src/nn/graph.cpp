// nn/graph.cpp
#include "semiasr/nn/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "semiasr/error.hpp"

namespace semiasr::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

ConstMapMat as_mat(const Tensor& t) {
  return ConstMapMat(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}
MapMat as_mat(Tensor& t) {
  return MapMat(t.values().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

Graph& graph_of(Var a) {
  if (!a.valid()) throw Error("op applied to an invalid variable");
  return *a.graph;
}

Graph& graph_of(Var a, Var b) {
  if (a.graph != b.graph) throw Error("op mixes variables from different graphs");
  return graph_of(a);
}

Tensor mat(std::size_t r, std::size_t c) { return Tensor::matrix(r, c, 0.0); }

template <typename F>
Var unary(Var a, const char* op, F&& f, std::function<double(double x, double y)> dfdx) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return g.make_node(std::move(y), {a.id}, [dfdx, ia = a.id](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    const Tensor& x = gr.value(ia);
    const Tensor& y = gr.value(self);
    Tensor& gx = gr.grad(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * dfdx(x[i], y[i]);
  }, op);
}

}  // namespace

const Tensor& Var::value() const {
  if (!valid()) throw Error("value() of an invalid variable");
  return graph->value(*this);
}

Var Graph::input(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.op = "input";
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::param(const std::string& name) {
  if (!params_) throw Error("graph has no parameter set; cannot bind '" + name + "'");
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var{this, it->second};
  Parameter& p = params_->at(name);
  Node n;
  n.value = p.value;
  n.op = "param";
  n.requires_grad = !p.frozen;
  n.param = &p;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(name, id);
  return Var{this, id};
}

Var Graph::make_node(Tensor value, std::vector<int> inputs, BackwardFn backward, const char* op,
                     bool differentiable) {
  if (check_finite_ && !value.all_finite()) {
    throw NonFiniteError(op, std::string("non-finite value produced by op '") + op + "'");
  }
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.differentiable = differentiable;
  for (int i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Graph::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

const Tensor& Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) throw Error("no gradient recorded for node " + std::to_string(v.id) + " (" + n.op + ")");
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw Error("backward: loss belongs to another graph");
  const Tensor& lv = nodes_[loss.id].value;
  if (lv.size() != 1) throw ShapeError("backward: loss must be a scalar, got shape " + lv.shape_string());
  for (auto& n : nodes_) n.grad = Tensor();
  grad(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (!n.inputs.empty()) {
      if (!n.differentiable) throw NonDifferentiableError(n.op);
      n.backward(*this, id);
    }
    if (n.param != nullptr) {
      Tensor& pg = n.param->grad;
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) shape_fail("matmul", A, B);
  Tensor C = mat(A.rows(), B.cols());
  as_mat(C).noalias() = as_mat(A) * as_mat(B);
  return g.make_node(std::move(C), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& gr, int self) {
    const Tensor& gc = gr.grad(self);
    if (gr.requires_grad(ia)) as_mat(gr.grad(ia)).noalias() += as_mat(gc) * as_mat(gr.value(ib)).transpose();
    if (gr.requires_grad(ib)) as_mat(gr.grad(ib)).noalias() += as_mat(gr.value(ia)).transpose() * as_mat(gc);
  }, "matmul");
}

Var matmul_nt(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.cols()) shape_fail("matmul_nt", A, B);
  Tensor C = mat(A.rows(), B.rows());
  as_mat(C).noalias() = as_mat(A) * as_mat(B).transpose();
  return g.make_node(std::move(C), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& gr, int self) {
    const Tensor& gc = gr.grad(self);
    if (gr.requires_grad(ia)) as_mat(gr.grad(ia)).noalias() += as_mat(gc) * as_mat(gr.value(ib));
    if (gr.requires_grad(ib)) as_mat(gr.grad(ib)).noalias() += as_mat(gc).transpose() * as_mat(gr.value(ia));
  }, "matmul_nt");
}

Var transpose(Var a) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  Tensor T = mat(A.cols(), A.rows());
  as_mat(T) = as_mat(A).transpose();
  return g.make_node(std::move(T), {a.id}, [ia = a.id](Graph& gr, int self) {
    as_mat(gr.grad(ia)) += as_mat(gr.grad(self)).transpose();
  }, "transpose");
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.size() != B.size() || A.rows() != B.rows()) shape_fail("add", A, B);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
  return g.make_node(std::move(C), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& gr, int self) {
    const Tensor& gc = gr.grad(self);
    for (int in : {ia, ib}) {
      if (!gr.requires_grad(in)) continue;
      Tensor& gi = gr.grad(in);
      for (std::size_t i = 0; i < gc.size(); ++i) gi[i] += gc[i];
    }
  }, "add");
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.size() != B.size() || A.rows() != B.rows()) shape_fail("sub", A, B);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
  return g.make_node(std::move(C), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& gr, int self) {
    const Tensor& gc = gr.grad(self);
    if (gr.requires_grad(ia)) {
      Tensor& ga = gr.grad(ia);
      for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
    }
    if (gr.requires_grad(ib)) {
      Tensor& gb = gr.grad(ib);
      for (std::size_t i = 0; i < gc.size(); ++i) gb[i] -= gc[i];
    }
  }, "sub");
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.size() != B.size() || A.rows() != B.rows()) shape_fail("mul", A, B);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  return g.make_node(std::move(C), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& gr, int self) {
    const Tensor& gc = gr.grad(self);
    if (gr.requires_grad(ia)) {
      Tensor& ga = gr.grad(ia);
      const Tensor& B = gr.value(ib);
      for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i] * B[i];
    }
    if (gr.requires_grad(ib)) {
      Tensor& gb = gr.grad(ib);
      const Tensor& A = gr.value(ia);
      for (std::size_t i = 0; i < gc.size(); ++i) gb[i] += gc[i] * A[i];
    }
  }, "mul");
}

Var add_row(Var a, Var row) {
  Graph& g = graph_of(a, row);
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) shape_fail("add_row", A, R);
  Tensor C = A;
  const std::size_t n = A.cols();
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) C[r * n + c] += R[c];
  return g.make_node(std::move(C), {a.id, row.id}, [ia = a.id, ir = row.id](Graph& gr, int self) {
    const Tensor& gc = gr.grad(self);
    if (gr.requires_grad(ia)) {
      Tensor& ga = gr.grad(ia);
      for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
    }
    if (gr.requires_grad(ir)) {
      Tensor& gb = gr.grad(ir);
      const std::size_t n = gb.size();
      for (std::size_t i = 0; i < gc.size(); ++i) gb[i % n] += gc[i];
    }
  }, "add_row");
}

Var mul_row(Var a, Var row) {
  Graph& g = graph_of(a, row);
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) shape_fail("mul_row", A, R);
  Tensor C = A;
  const std::size_t n = A.cols();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= R[i % n];
  return g.make_node(std::move(C), {a.id, row.id}, [ia = a.id, ir = row.id](Graph& gr, int self) {
    const Tensor& gc = gr.grad(self);
    const std::size_t n = gr.value(ir).size();
    if (gr.requires_grad(ia)) {
      Tensor& ga = gr.grad(ia);
      const Tensor& R = gr.value(ir);
      for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i] * R[i % n];
    }
    if (gr.requires_grad(ir)) {
      Tensor& gb = gr.grad(ir);
      const Tensor& A = gr.value(ia);
      for (std::size_t i = 0; i < gc.size(); ++i) gb[i % n] += gc[i] * A[i];
    }
  }, "mul_row");
}

Var add_const(Var a, const Tensor& c) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  if (A.size() != c.size()) shape_fail("add_const", A, c);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += c[i];
  return g.make_node(std::move(C), {a.id}, [ia = a.id](Graph& gr, int self) {
    const Tensor& gc = gr.grad(self);
    Tensor& ga = gr.grad(ia);
    for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
  }, "add_const");
}

Var scale(Var a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var relu(Var a) {
  return unary(a, "relu", [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var gelu(Var a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Var tanh(Var a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// ---------------------------------------------------------------------------
// Normalizations

Var softmax_rows(Var a) {
  Graph& g = graph_of(a);
  const Tensor& X = a.value();
  const std::size_t n = X.cols();
  Tensor Y = X;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto row = Y.row_span(r);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double& v : row) s += (v = std::exp(v - m));
    for (double& v : row) v /= s;
  }
  return g.make_node(std::move(Y), {a.id}, [ia = a.id, n](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    const Tensor& y = gr.value(self);
    Tensor& gx = gr.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += gy[r * n + c] * y[r * n + c];
      for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += y[r * n + c] * (gy[r * n + c] - dot);
    }
  }, "softmax_rows");
}

Var log_softmax_rows(Var a) {
  Graph& g = graph_of(a);
  const Tensor& X = a.value();
  const std::size_t n = X.cols();
  Tensor Y = X;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto row = Y.row_span(r);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (double& v : row) v -= lse;
  }
  return g.make_node(std::move(Y), {a.id}, [ia = a.id, n](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    const Tensor& y = gr.value(self);
    Tensor& gx = gr.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += gy[r * n + c];
      for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += gy[r * n + c] - std::exp(y[r * n + c]) * s;
    }
  }, "log_softmax_rows");
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  Graph& g = graph_of(x, gain);
  const Tensor& X = x.value();
  const std::size_t n = X.cols();
  if (gain.value().size() != n || bias.value().size() != n) shape_fail("layer_norm_rows", X, gain.value());
  const std::size_t rows = X.rows();
  Tensor xhat = X;
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = xhat.row_span(r);
    double mu = 0.0;
    for (double v : row) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (double& v : row) v = (v - mu) * inv_std[r];
  }
  Tensor Y = xhat;
  const Tensor& G = gain.value();
  const Tensor& B = bias.value();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = Y[i] * G[i % n] + B[i % n];
  return g.make_node(
      std::move(Y), {x.id, gain.id, bias.id},
      [ix = x.id, ig = gain.id, ib = bias.id, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Graph& gr, int self) {
        const Tensor& gy = gr.grad(self);
        const Tensor& G = gr.value(ig);
        if (gr.requires_grad(ig)) {
          Tensor& gg = gr.grad(ig);
          for (std::size_t i = 0; i < gy.size(); ++i) gg[i % n] += gy[i] * xhat[i];
        }
        if (gr.requires_grad(ib)) {
          Tensor& gb = gr.grad(ib);
          for (std::size_t i = 0; i < gy.size(); ++i) gb[i % n] += gy[i];
        }
        if (gr.requires_grad(ix)) {
          Tensor& gx = gr.grad(ix);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < inv_std.size(); ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              const double d = gy[r * n + c] * G[c];
              s1 += d;
              s2 += d * xhat[r * n + c];
            }
            for (std::size_t c = 0; c < n; ++c) {
              const double d = gy[r * n + c] * G[c];
              gx[r * n + c] += inv_std[r] * (d - inv_n * s1 - xhat[r * n + c] * inv_n * s2);
            }
          }
        }
      },
      "layer_norm_rows");
}

// ---------------------------------------------------------------------------
// Convolution

Var conv1d(Var x, Var w, Var b, std::size_t kernel, std::size_t stride) {
  Graph& g = graph_of(x, w);
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const std::size_t T = X.rows();
  const std::size_t cin = X.cols();
  if (kernel == 0 || stride == 0) throw ShapeError("conv1d: kernel and stride must be positive");
  if (W.rows() != kernel * cin) shape_fail("conv1d", X, W);
  if (b.value().size() != W.cols()) shape_fail("conv1d", W, b.value());
  if (T < kernel) {
    throw ShapeError("conv1d: input length " + std::to_string(T) + " is shorter than kernel " +
                     std::to_string(kernel));
  }
  const std::size_t tout = (T - kernel) / stride + 1;
  // A patch of `kernel` consecutive frames is contiguous in row-major [T, Cin],
  // so the im2col matrix is a strided view of X.
  Tensor patches = mat(tout, kernel * cin);
  for (std::size_t t = 0; t < tout; ++t) {
    const double* src = X.values().data() + t * stride * cin;
    std::copy(src, src + kernel * cin, patches.values().data() + t * kernel * cin);
  }
  Tensor Y = mat(tout, W.cols());
  as_mat(Y).noalias() = as_mat(patches) * as_mat(W);
  const Tensor& B = b.value();
  const std::size_t cout = W.cols();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += B[i % cout];
  return g.make_node(
      std::move(Y), {x.id, w.id, b.id},
      [ix = x.id, iw = w.id, ib = b.id, kernel, stride, cin, patches = std::move(patches)](Graph& gr, int self) {
        const Tensor& gy = gr.grad(self);
        const std::size_t cout = gy.cols();
        if (gr.requires_grad(iw)) as_mat(gr.grad(iw)).noalias() += as_mat(patches).transpose() * as_mat(gy);
        if (gr.requires_grad(ib)) {
          Tensor& gb = gr.grad(ib);
          for (std::size_t i = 0; i < gy.size(); ++i) gb[i % cout] += gy[i];
        }
        if (gr.requires_grad(ix)) {
          Tensor gp = mat(gy.rows(), kernel * cin);
          as_mat(gp).noalias() = as_mat(gy) * as_mat(gr.value(iw)).transpose();
          Tensor& gx = gr.grad(ix);
          for (std::size_t t = 0; t < gy.rows(); ++t) {
            double* dst = gx.values().data() + t * stride * cin;
            const double* src = gp.values().data() + t * kernel * cin;
            for (std::size_t j = 0; j < kernel * cin; ++j) dst[j] += src[j];
          }
        }
      },
      "conv1d");
}

// ---------------------------------------------------------------------------
// Structural ops

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Graph& g = graph_of(parts.front());
  const std::size_t rows = parts.front().rows();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  for (Var p : parts) {
    if (p.graph != &g) throw Error("concat_cols mixes graphs");
    if (p.rows() != rows) shape_fail("concat_cols", parts.front().value(), p.value());
    total += p.cols();
    ids.push_back(p.id);
    widths.push_back(p.cols());
  }
  Tensor Y = mat(rows, total);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& P = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(P.values().data() + r * P.cols(), P.cols(), Y.values().data() + r * total + off);
    off += P.cols();
  }
  return g.make_node(std::move(Y), ids, [ids, widths, total](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (gr.requires_grad(ids[k])) {
        Tensor& gp = gr.grad(ids[k]);
        for (std::size_t r = 0; r < gy.rows(); ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) gp[r * widths[k] + c] += gy[r * total + off + c];
      }
      off += widths[k];
    }
  }, "concat_cols");
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Graph& g = graph_of(parts.front());
  const std::size_t cols = parts.front().cols();
  std::size_t total = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    if (p.graph != &g) throw Error("concat_rows mixes graphs");
    if (p.cols() != cols) shape_fail("concat_rows", parts.front().value(), p.value());
    total += p.rows();
    ids.push_back(p.id);
  }
  Tensor Y = mat(total, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& P = p.value();
    std::copy(P.values().begin(), P.values().end(), Y.values().begin() + static_cast<std::ptrdiff_t>(off));
    off += P.size();
  }
  return g.make_node(std::move(Y), ids, [ids](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t n = gr.value(id).size();
      if (gr.requires_grad(id)) {
        Tensor& gp = gr.grad(id);
        for (std::size_t i = 0; i < n; ++i) gp[i] += gy[off + i];
      }
      off += n;
    }
  }, "concat_rows");
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  if (begin > end || end > A.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for shape " + A.shape_string());
  }
  const std::size_t w = end - begin;
  const std::size_t n = A.cols();
  Tensor Y = mat(A.rows(), w);
  for (std::size_t r = 0; r < A.rows(); ++r)
    std::copy_n(A.values().data() + r * n + begin, w, Y.values().data() + r * w);
  return g.make_node(std::move(Y), {a.id}, [ia = a.id, begin, w, n](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    Tensor& ga = gr.grad(ia);
    for (std::size_t r = 0; r < gy.rows(); ++r)
      for (std::size_t c = 0; c < w; ++c) ga[r * n + begin + c] += gy[r * w + c];
  }, "slice_cols");
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  if (begin > end || end > A.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for shape " + A.shape_string());
  }
  const std::size_t n = A.cols();
  Tensor Y = mat(end - begin, n);
  std::copy_n(A.values().data() + begin * n, (end - begin) * n, Y.values().data());
  return g.make_node(std::move(Y), {a.id}, [ia = a.id, begin, n](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    Tensor& ga = gr.grad(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[begin * n + i] += gy[i];
  }, "slice_rows");
}

Var gather_rows(Var a, const std::vector<std::size_t>& index) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const std::size_t n = A.cols();
  Tensor Y = mat(index.size(), n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= A.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of range for shape " +
                       A.shape_string());
    }
    std::copy_n(A.values().data() + index[i] * n, n, Y.values().data() + i * n);
  }
  return g.make_node(std::move(Y), {a.id}, [ia = a.id, index, n](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    Tensor& ga = gr.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t c = 0; c < n; ++c) ga[index[i] * n + c] += gy[i * n + c];
  }, "gather_rows");
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  if (rows * cols != A.size()) {
    throw ShapeError("reshape: cannot view " + A.shape_string() + " as [" + std::to_string(rows) + ", " +
                     std::to_string(cols) + "]");
  }
  return g.make_node(A.reshaped({rows, cols}), {a.id}, [ia = a.id](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    Tensor& ga = gr.grad(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
  }, "reshape");
}

// ---------------------------------------------------------------------------
// Reductions. Summation is sequential in row-major order.

Var sum(Var a) {
  Graph& g = graph_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return g.make_node(Tensor::scalar(s), {a.id}, [ia = a.id](Graph& gr, int self) {
    const double gy = gr.grad(self)[0];
    for (double& v : gr.grad(ia).values()) v += gy;
  }, "sum");
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(Var a) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const std::size_t n = A.cols();
  Tensor Y = mat(1, n);
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) Y[c] += A[r * n + c];
  return g.make_node(std::move(Y), {a.id}, [ia = a.id, n](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    Tensor& ga = gr.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i % n];
  }, "sum_rows");
}

Var mean_rows(Var a) {
  const std::size_t r = a.rows();
  if (r == 0) throw ShapeError("mean_rows: no rows");
  return scale(sum_rows(a), 1.0 / static_cast<double>(r));
}

Var sum_cols(Var a) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const std::size_t n = A.cols();
  Tensor Y = mat(A.rows(), 1);
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) Y[r] += A[r * n + c];
  return g.make_node(std::move(Y), {a.id}, [ia = a.id, n](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    Tensor& ga = gr.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i / n];
  }, "sum_cols");
}

Var cosine_rows(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_fail("cosine_rows", A, B);
  const std::size_t rows = A.rows();
  const std::size_t d = A.cols();
  Tensor Y = mat(rows, 1);
  std::vector<double> na(rows), nb(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double x = A[r * d + c];
      const double y = B[r * d + c];
      dot += x * y;
      aa += x * x;
      bb += y * y;
    }
    if (aa == 0.0 || bb == 0.0) {
      throw Error("cosine_rows: zero-norm vector in row " + std::to_string(r) + "; cosine similarity undefined");
    }
    na[r] = std::sqrt(aa);
    nb[r] = std::sqrt(bb);
    Y[r] = dot / (na[r] * nb[r]);
  }
  return g.make_node(std::move(Y), {a.id, b.id},
                     [ia = a.id, ib = b.id, d, na = std::move(na), nb = std::move(nb)](Graph& gr, int self) {
                       const Tensor& gy = gr.grad(self);
                       const Tensor& y = gr.value(self);
                       const Tensor& A = gr.value(ia);
                       const Tensor& B = gr.value(ib);
                       const bool need_a = gr.requires_grad(ia);
                       const bool need_b = gr.requires_grad(ib);
                       for (std::size_t r = 0; r < y.rows(); ++r) {
                         const double s = y[r];
                         const double inv = 1.0 / (na[r] * nb[r]);
                         for (std::size_t c = 0; c < d; ++c) {
                           const double x = A[r * d + c];
                           const double z = B[r * d + c];
                           if (need_a) gr.grad(ia)[r * d + c] += gy[r] * (z * inv - s * x / (na[r] * na[r]));
                           if (need_b) gr.grad(ib)[r * d + c] += gy[r] * (x * inv - s * z / (nb[r] * nb[r]));
                         }
                       }
                     },
                     "cosine_rows");
}

Var pick(Var a, const std::vector<std::size_t>& index) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  if (index.size() != A.rows()) {
    throw ShapeError("pick: " + std::to_string(index.size()) + " indices for shape " + A.shape_string());
  }
  const std::size_t n = A.cols();
  Tensor Y = mat(A.rows(), 1);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    if (index[r] >= n) throw ShapeError("pick: column index out of range for shape " + A.shape_string());
    Y[r] = A[r * n + index[r]];
  }
  return g.make_node(std::move(Y), {a.id}, [ia = a.id, index, n](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    Tensor& ga = gr.grad(ia);
    for (std::size_t r = 0; r < index.size(); ++r) ga[r * n + index[r]] += gy[r];
  }, "pick");
}

Var replace_rows(Var x, const std::vector<bool>& mask, Var row) {
  Graph& g = graph_of(x, row);
  const Tensor& X = x.value();
  const Tensor& R = row.value();
  if (mask.size() != X.rows() || R.rows() != 1 || R.cols() != X.cols()) shape_fail("replace_rows", X, R);
  const std::size_t n = X.cols();
  Tensor Y = X;
  for (std::size_t r = 0; r < X.rows(); ++r)
    if (mask[r]) std::copy_n(R.values().data(), n, Y.values().data() + r * n);
  return g.make_node(std::move(Y), {x.id, row.id}, [ix = x.id, ir = row.id, mask, n](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    const bool need_x = gr.requires_grad(ix);
    const bool need_r = gr.requires_grad(ir);
    for (std::size_t r = 0; r < mask.size(); ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        if (mask[r]) {
          if (need_r) gr.grad(ir)[c] += gy[r * n + c];
        } else if (need_x) {
          gr.grad(ix)[r * n + c] += gy[r * n + c];
        }
      }
    }
  }, "replace_rows");
}

Var straight_through(const Tensor& hard, Var soft) {
  Graph& g = graph_of(soft);
  if (!hard.same_shape(soft.value())) shape_fail("straight_through", hard, soft.value());
  return g.make_node(hard, {soft.id}, [is = soft.id](Graph& gr, int self) {
    const Tensor& gy = gr.grad(self);
    Tensor& gs = gr.grad(is);
    for (std::size_t i = 0; i < gy.size(); ++i) gs[i] += gy[i];
  }, "straight_through");
}

Var hard_argmax_rows(Var a) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const std::size_t n = A.cols();
  Tensor Y = mat(A.rows(), n);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    auto row = A.row_span(r);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    Y[r * n + best] = 1.0;
  }
  return g.make_node(std::move(Y), {a.id}, [](Graph&, int) {}, "hard_argmax", /*differentiable=*/false);
}

}  // namespace semiasr::nn
