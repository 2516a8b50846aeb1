// ctc/ctc.cpp
#include "semiasr/ctc/ctc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

namespace semiasr::ctc {

using nn::Tensor;
using nn::Var;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

std::size_t required_frames(const std::vector<int>& target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

std::vector<int> to_columns(const std::vector<int>& ids) {
  std::vector<int> out(ids);
  for (int& v : out) ++v;
  return out;
}

std::vector<int> to_ids(const std::vector<int>& columns) {
  std::vector<int> out;
  out.reserve(columns.size());
  for (int c : columns)
    if (c != kBlank) out.push_back(c - 1);
  return out;
}

double ctc_loss_value(const Tensor& lp, const std::vector<int>& target, Tensor* grad) {
  const std::size_t T = lp.rows();
  const std::size_t V = lp.cols();
  for (int c : target) {
    if (c <= kBlank || static_cast<std::size_t>(c) >= V) {
      throw ShapeError("ctc_loss: target label " + std::to_string(c) + " outside 1.." + std::to_string(V - 1));
    }
  }
  const std::size_t need = required_frames(target);
  if (T < need || T == 0) throw InfeasibleTargetError(T, std::max<std::size_t>(need, 1));

  // blank-interleaved lattice: b l1 b l2 ... lL b
  const std::size_t S = 2 * target.size() + 1;
  std::vector<int> ext(S, kBlank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto skip_ok = [&](std::size_t s) { return s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]; };

  std::vector<double> alpha(T * S, kNegInf);
  alpha[0] = lp(0, ext[0]);
  if (S > 1) alpha[1] = lp(0, ext[1]);
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = &alpha[(t - 1) * S];
    double* cur = &alpha[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      double a = prev[s];
      if (s >= 1) a = lse(a, prev[s - 1]);
      if (skip_ok(s)) a = lse(a, prev[s - 2]);
      cur[s] = a == kNegInf ? kNegInf : a + lp(t, ext[s]);
    }
  }
  const double* last = &alpha[(T - 1) * S];
  const double log_z = S > 1 ? lse(last[S - 1], last[S - 2]) : last[0];
  if (!grad) return -log_z;

  // beta excludes the emission at its own frame
  std::vector<double> beta(T * S, kNegInf);
  beta[(T - 1) * S + S - 1] = 0.0;
  if (S > 1) beta[(T - 1) * S + S - 2] = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    const double* next = &beta[(t + 1) * S];
    double* cur = &beta[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      double b = next[s] == kNegInf ? kNegInf : next[s] + lp(t + 1, ext[s]);
      if (s + 1 < S && next[s + 1] != kNegInf) b = lse(b, next[s + 1] + lp(t + 1, ext[s + 1]));
      if (s + 2 < S && skip_ok(s + 2) && next[s + 2] != kNegInf) b = lse(b, next[s + 2] + lp(t + 1, ext[s + 2]));
      cur[s] = b;
    }
  }
  *grad = Tensor::matrix(T, V);
  if (log_z == kNegInf) return -log_z;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      const double a = alpha[t * S + s];
      const double b = beta[t * S + s];
      if (a == kNegInf || b == kNegInf) continue;
      (*grad)[t * V + static_cast<std::size_t>(ext[s])] -= std::exp(a + b - log_z);
    }
  }
  return -log_z;
}

Var ctc_loss(Var log_probs, const std::vector<int>& target) {
  nn::Graph& g = *log_probs.graph;
  Tensor d;
  const double loss = ctc_loss_value(log_probs.value(), target, &d);
  return g.make_node(Tensor::scalar(loss), {log_probs.id}, [in = log_probs.id, d = std::move(d)](nn::Graph& gr, int self) {
    const double up = gr.grad(self)[0];
    Tensor& gi = gr.grad(in);
    for (std::size_t i = 0; i < d.size(); ++i) gi[i] += up * d[i];
  }, "ctc_loss");
}

std::vector<int> ctc_greedy_decode(const Tensor& lp) {
  std::vector<int> out;
  int prev = -1;
  for (std::size_t t = 0; t < lp.rows(); ++t) {
    auto row = lp.row_span(t);
    const int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best != prev && best != kBlank) out.push_back(best);
    prev = best;
  }
  return out;
}

std::string ctc_greedy_text(const Tensor& lp, const corpus::Vocabulary& vocab) {
  return vocab.decode(to_ids(ctc_greedy_decode(lp)));
}

void validate_emissions(const Tensor& lp, double tolerance) {
  for (std::size_t t = 0; t < lp.rows(); ++t) {
    double acc = kNegInf;
    for (double v : lp.row_span(t)) acc = lse(acc, v);
    if (!(std::abs(acc) <= tolerance)) {
      throw ShapeError("emissions: row " + std::to_string(t) + " log-sum-exps to " + std::to_string(acc) +
                       ", expected 0");
    }
  }
}

static_assert(std::endian::native == std::endian::little, "emission files are written in host byte order");

void write_emissions(const std::filesystem::path& path, const Tensor& lp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto t = static_cast<std::uint32_t>(lp.rows());
  const auto v = static_cast<std::uint32_t>(lp.cols());
  out.write(reinterpret_cast<const char*>(&t), 4);
  out.write(reinterpret_cast<const char*>(&v), 4);
  for (double x : lp.values()) {
    const float f = static_cast<float>(x);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor read_emissions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint32_t t = 0, v = 0;
  in.read(reinterpret_cast<char*>(&t), 4);
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw IoError(path.string() + ": truncated header");
  Tensor out = Tensor::matrix(t, v);
  for (std::size_t i = 0; i < out.size(); ++i) {
    float f = 0.0f;
    in.read(reinterpret_cast<char*>(&f), 4);
    if (!in) throw IoError(path.string() + ": truncated at value " + std::to_string(i));
    out[i] = f;
  }
  return out;
}

}  // namespace semiasr::ctc
