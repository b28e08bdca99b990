// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reverse-mode AD over dense row-major matrices, with a forward-mode channel.
//
// Every node value is a matrix (a batch of points is one node, not one node per
// scalar). jvp() writes tangents as ordinary nodes built from the same
// primitive set, so a later backward() over the tape differentiates through the
// directional derivatives. That is how Jacobian-trace probes get parameter
// gradients without a second tape.

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/matrix.hpp"

namespace bridgekit::ad {

// Named trainable tensors. Shapes are fixed at insertion.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  std::size_t add(std::string name, Matrix value) {
    detail::require(!index_.contains(name), "ParamSet: duplicate parameter name '" + name + "'");
    index_.emplace(name, entries_.size());
    total_ += value.size();
    entries_.push_back({std::move(name), std::move(value)});
    return entries_.size() - 1;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_count() const noexcept { return total_; }

  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  const Matrix& value(std::size_t i) const { return entries_[i].value; }

  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    detail::require(it != index_.end(), "ParamSet: no parameter named '" + name + "'");
    return it->second;
  }
  const Matrix& value(const std::string& name) const { return value(index(name)); }

  // Overwrites values in place; the shape must not change.
  void assign(std::size_t i, const Matrix& v) {
    detail::require(v.shape() == entries_[i].value.shape(),
                    "ParamSet: shape change for '" + entries_[i].name + "'");
    entries_[i].value = v;
  }
  Matrix& mutable_value(std::size_t i) { return entries_[i].value; }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool operator==(const ParamSet& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].name != o.entries_[i].name || !(entries_[i].value == o.entries_[i].value))
        return false;
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t total_ = 0;
};

enum class Op {
  Input,
  Constant,
  Param,
  Add,
  Sub,
  Mul,
  MatMul,
  Tanh,
  Square,
  Rsqrt,    // y = 1 / sqrt(a)
  Affine,   // y = scale * a + shift
  Sum,      // all entries -> 1x1
  RowSum,   // n x m -> n x 1
  RowMean,  // n x m -> n x 1
  GatherCol // n x m -> n x 1, column `index`
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

class Tape {
 public:
  struct Node {
    Op op = Op::Input;
    int a = -1;
    int b = -1;
    double scale = 1.0;
    double shift = 0.0;
    std::size_t index = 0;  // parameter index or gathered column
    const ParamSet* params = nullptr;
    Matrix value;
    bool requires_grad = false;
  };

  static Node make_node(Op op, int a = -1, int b = -1) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    return n;
  }

  Tape() { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Matrix v, bool requires_grad = false) {
    Node n = make_node(Op::Input);
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  Var constant(Matrix v) {
    Node n = make_node(Op::Constant);
    n.value = std::move(v);
    return push(std::move(n));
  }

  // The node reads through to `ps`, which must outlive the tape unchanged.
  Var param(const ParamSet& ps, std::size_t i) {
    Node n = make_node(Op::Param);
    n.params = &ps;
    n.index = i;
    n.requires_grad = true;
    return push(std::move(n));
  }

  const Matrix& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.op == Op::Param ? n.params->value(n.index) : n.value;
  }
  const Matrix& value(Var v) const { return value(v.id); }
  Shape shape(int id) const { return value(id).shape(); }

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Primitive constructors. Shapes are checked here; values are computed eagerly.
  Var binary(Op op, Var x, Var y);
  Var matmul(Var x, Var y);
  Var unary(Op op, Var x, double scale = 1.0, double shift = 0.0, std::size_t index = 0);

 private:
  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
};

namespace detail_ops {

inline bool broadcastable(std::size_t a, std::size_t b) { return a == b || a == 1 || b == 1; }

// out[r,c] = f(a[r*,c*], b[r*,c*]) with size-1 dimensions broadcast.
template <typename F>
Matrix broadcast_apply(const Matrix& a, const Matrix& b, F f) {
  const std::size_t rows = std::max(a.rows(), b.rows());
  const std::size_t cols = std::max(a.cols(), b.cols());
  Matrix out(rows, cols);
  if (a.shape() == b.shape()) {
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  const std::size_t ars = a.rows() == 1 ? 0 : a.cols(), acs = a.cols() == 1 ? 0 : 1;
  const std::size_t brs = b.rows() == 1 ? 0 : b.cols(), bcs = b.cols() == 1 ? 0 : 1;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* pa = a.data() + r * ars;
    const double* pb = b.data() + r * brs;
    double* po = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) po[c] = f(pa[c * acs], pb[c * bcs]);
  }
  return out;
}

// Adds `g` (output-shaped) into `acc` (input-shaped), summing over broadcast axes.
inline void reduce_into(Matrix& acc, const Matrix& g) {
  if (acc.shape() == g.shape()) {
    for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    return;
  }
  const std::size_t rs = acc.rows() == 1 ? 0 : acc.cols(), cs = acc.cols() == 1 ? 0 : 1;
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) acc[r * rs + c * cs] += g(r, c);
}

// out = a * b, naive ikj loop; each output row depends only on its input row.
inline Matrix gemm(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  const std::size_t K = a.cols(), M = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* po = out.data() + i * M;
    const double* pa = a.data() + i * K;
    for (std::size_t k = 0; k < K; ++k) {
      const double aik = pa[k];
      if (aik == 0.0) continue;
      const double* pb = b.data() + k * M;
      for (std::size_t j = 0; j < M; ++j) po[j] += aik * pb[j];
    }
  }
  return out;
}

// acc += a * b^T
inline void gemm_nt_acc(Matrix& acc, const Matrix& a, const Matrix& b) {
  const std::size_t M = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* pa = a.data() + i * M;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* pb = b.data() + j * M;
      double s = 0.0;
      for (std::size_t k = 0; k < M; ++k) s += pa[k] * pb[k];
      acc(i, j) += s;
    }
  }
}

// acc += a^T * b
inline void gemm_tn_acc(Matrix& acc, const Matrix& a, const Matrix& b) {
  const std::size_t K = a.cols(), M = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* pa = a.data() + r * K;
    const double* pb = b.data() + r * M;
    for (std::size_t k = 0; k < K; ++k) {
      const double ark = pa[k];
      if (ark == 0.0) continue;
      double* po = acc.data() + k * M;
      for (std::size_t j = 0; j < M; ++j) po[j] += ark * pb[j];
    }
  }
}

}  // namespace detail_ops

inline Var Tape::binary(Op op, Var x, Var y) {
  detail::require(x.tape == this && y.tape == this, "Tape: operand from another tape");
  const Matrix& a = value(x.id);
  const Matrix& b = value(y.id);
  detail::require(detail_ops::broadcastable(a.rows(), b.rows()) &&
                      detail_ops::broadcastable(a.cols(), b.cols()),
                  "Tape: incompatible shapes " + a.shape().str() + " and " + b.shape().str());
  Node n = make_node(op, x.id, y.id);
  switch (op) {
    case Op::Add: n.value = detail_ops::broadcast_apply(a, b, [](double p, double q) { return p + q; }); break;
    case Op::Sub: n.value = detail_ops::broadcast_apply(a, b, [](double p, double q) { return p - q; }); break;
    case Op::Mul: n.value = detail_ops::broadcast_apply(a, b, [](double p, double q) { return p * q; }); break;
    default: throw ContractViolation("Tape::binary: not a binary op");
  }
  n.requires_grad = node(x.id).requires_grad || node(y.id).requires_grad;
  return push(std::move(n));
}

inline Var Tape::matmul(Var x, Var y) {
  detail::require(x.tape == this && y.tape == this, "Tape: operand from another tape");
  const Matrix& a = value(x.id);
  const Matrix& b = value(y.id);
  detail::require(a.cols() == b.rows(),
                  "Tape::matmul: inner dimension mismatch " + a.shape().str() + " * " + b.shape().str());
  Node n = make_node(Op::MatMul, x.id, y.id);
  n.value = detail_ops::gemm(a, b);
  n.requires_grad = node(x.id).requires_grad || node(y.id).requires_grad;
  return push(std::move(n));
}

inline Var Tape::unary(Op op, Var x, double scale, double shift, std::size_t index) {
  detail::require(x.tape == this, "Tape: operand from another tape");
  const Matrix& a = value(x.id);
  Node n = make_node(op, x.id);
  n.scale = scale;
  n.shift = shift;
  n.index = index;
  switch (op) {
    case Op::Tanh:
      n.value = Matrix(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::tanh(a[i]);
      break;
    case Op::Square:
      n.value = Matrix(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] * a[i];
      break;
    case Op::Rsqrt:
      n.value = Matrix(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = 1.0 / std::sqrt(a[i]);
      break;
    case Op::Affine:
      n.value = Matrix(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = scale * a[i] + shift;
      break;
    case Op::Sum: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
      n.value = Matrix(1, 1, s);
      break;
    }
    case Op::RowSum:
    case Op::RowMean: {
      n.value = Matrix(a.rows(), 1);
      const double w = op == Op::RowMean ? 1.0 / static_cast<double>(a.cols()) : 1.0;
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (double v : a.row(r)) s += v;
        n.value[r] = s * w;
      }
      break;
    }
    case Op::GatherCol:
      detail::require(index < a.cols(), "Tape::gather_col: column out of range");
      n.value = Matrix(a.rows(), 1);
      for (std::size_t r = 0; r < a.rows(); ++r) n.value[r] = a(r, index);
      break;
    default: throw ContractViolation("Tape::unary: not a unary op");
  }
  n.requires_grad = node(x.id).requires_grad;
  return push(std::move(n));
}

// ---- expression helpers -------------------------------------------------

inline Var operator+(Var a, Var b) { return a.tape->binary(Op::Add, a, b); }
inline Var operator-(Var a, Var b) { return a.tape->binary(Op::Sub, a, b); }
inline Var operator*(Var a, Var b) { return a.tape->binary(Op::Mul, a, b); }
inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var tanh(Var a) { return a.tape->unary(Op::Tanh, a); }
inline Var square(Var a) { return a.tape->unary(Op::Square, a); }
inline Var rsqrt(Var a) { return a.tape->unary(Op::Rsqrt, a); }
inline Var affine(Var a, double scale, double shift) { return a.tape->unary(Op::Affine, a, scale, shift); }
inline Var operator*(double s, Var a) { return affine(a, s, 0.0); }
inline Var sum(Var a) { return a.tape->unary(Op::Sum, a); }
inline Var row_sum(Var a) { return a.tape->unary(Op::RowSum, a); }
inline Var row_mean(Var a) { return a.tape->unary(Op::RowMean, a); }
inline Var gather_col(Var a, std::size_t col) { return a.tape->unary(Op::GatherCol, a, 1.0, 0.0, col); }

// Row-wise layer normalization with affine gain/bias (1 x m each), written in
// primitives so that its tangent and second derivatives come for free.
inline Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
  Var centered = x - row_mean(x);
  Var inv_std = rsqrt(affine(row_mean(square(centered)), 1.0, eps));
  return centered * inv_std * gain + bias;
}

// ---- reverse mode -------------------------------------------------------

class Gradients {
 public:
  explicit Gradients(std::vector<Matrix> g, const Tape& t) : grads_(std::move(g)), tape_(&t) {}

  // Gradient w.r.t. any recorded node; zeros if the loss does not depend on it.
  Matrix wrt(Var v) const {
    const auto& g = grads_[static_cast<std::size_t>(v.id)];
    return g.size() ? g : Matrix(tape_->shape(v.id));
  }

  // Gradients aligned with `ps`, summed over every Param node that reads from it.
  std::vector<Matrix> for_params(const ParamSet& ps) const {
    std::vector<Matrix> out;
    out.reserve(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) out.emplace_back(ps.value(i).shape());
    for (std::size_t id = 0; id < grads_.size(); ++id) {
      const auto& n = tape_->node(static_cast<int>(id));
      if (n.op != Op::Param || n.params != &ps || !grads_[id].size()) continue;
      detail_ops::reduce_into(out[n.index], grads_[id]);
    }
    return out;
  }

  std::unordered_map<std::string, Matrix> by_name(const ParamSet& ps) const {
    auto aligned = for_params(ps);
    std::unordered_map<std::string, Matrix> out;
    for (std::size_t i = 0; i < ps.size(); ++i) out.emplace(ps.name(i), std::move(aligned[i]));
    return out;
  }

 private:
  std::vector<Matrix> grads_;
  const Tape* tape_;
};

inline Gradients backward(const Tape& tape, Var loss) {
  detail::require(loss.tape == &tape, "backward: loss node from another tape");
  const Shape ls = tape.shape(loss.id);
  detail::require(ls.rows == 1 && ls.cols == 1, "backward: loss must be scalar, got " + ls.str());

  std::vector<Matrix> g(static_cast<std::size_t>(loss.id) + 1);
  g[static_cast<std::size_t>(loss.id)] = Matrix(1, 1, 1.0);

  auto acc = [&](int id) -> Matrix* {
    if (id < 0 || !tape.node(id).requires_grad) return nullptr;
    auto& m = g[static_cast<std::size_t>(id)];
    if (!m.size()) m = Matrix(tape.shape(id));
    return &m;
  };

  for (int id = loss.id; id >= 0; --id) {
    const Matrix& gy = g[static_cast<std::size_t>(id)];
    if (!gy.size()) continue;
    const auto& n = tape.node(id);
    if (!n.requires_grad) continue;
    switch (n.op) {
      case Op::Input:
      case Op::Constant:
      case Op::Param: break;
      case Op::Add:
        if (auto* ga = acc(n.a)) detail_ops::reduce_into(*ga, gy);
        if (auto* gb = acc(n.b)) detail_ops::reduce_into(*gb, gy);
        break;
      case Op::Sub:
        if (auto* ga = acc(n.a)) detail_ops::reduce_into(*ga, gy);
        if (auto* gb = acc(n.b)) {
          Matrix neg = gy;
          for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -neg[i];
          detail_ops::reduce_into(*gb, neg);
        }
        break;
      case Op::Mul: {
        const Matrix& va = tape.value(n.a);
        const Matrix& vb = tape.value(n.b);
        if (auto* ga = acc(n.a)) {
          const Matrix prod = detail_ops::broadcast_apply(gy, vb, [](double p, double q) { return p * q; });
          detail_ops::reduce_into(*ga, prod);
        }
        if (auto* gb = acc(n.b)) {
          const Matrix prod = detail_ops::broadcast_apply(gy, va, [](double p, double q) { return p * q; });
          detail_ops::reduce_into(*gb, prod);
        }
        break;
      }
      case Op::MatMul:
        if (auto* ga = acc(n.a)) detail_ops::gemm_nt_acc(*ga, gy, tape.value(n.b));
        if (auto* gb = acc(n.b)) detail_ops::gemm_tn_acc(*gb, tape.value(n.a), gy);
        break;
      case Op::Tanh:
        if (auto* ga = acc(n.a))
          for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      case Op::Square:
        if (auto* ga = acc(n.a)) {
          const Matrix& va = tape.value(n.a);
          for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += 2.0 * va[i] * gy[i];
        }
        break;
      case Op::Rsqrt:
        if (auto* ga = acc(n.a))
          for (std::size_t i = 0; i < gy.size(); ++i) {
            const double y = n.value[i];
            (*ga)[i] += -0.5 * y * y * y * gy[i];
          }
        break;
      case Op::Affine:
        if (auto* ga = acc(n.a))
          for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += n.scale * gy[i];
        break;
      case Op::Sum:
        if (auto* ga = acc(n.a))
          for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += gy[0];
        break;
      case Op::RowSum:
      case Op::RowMean:
        if (auto* ga = acc(n.a)) {
          const double w = n.op == Op::RowMean ? 1.0 / static_cast<double>(ga->cols()) : 1.0;
          for (std::size_t r = 0; r < ga->rows(); ++r)
            for (double& v : ga->row(r)) v += w * gy[r];
        }
        break;
      case Op::GatherCol:
        if (auto* ga = acc(n.a))
          for (std::size_t r = 0; r < ga->rows(); ++r) (*ga)(r, n.index) += gy[r];
        break;
    }
  }
  return Gradients(std::move(g), tape);
}

// ---- forward mode -------------------------------------------------------

// Tangents of every node recorded after `input`, as nodes on the same tape.
class Jvp {
 public:
  Jvp(Tape& tape, std::vector<int> tangent) : tape_(&tape), tangent_(std::move(tangent)) {}

  // Tangent of `v`; a zero constant is recorded when `v` does not depend on the input.
  Var tangent(Var v) const {
    const auto i = static_cast<std::size_t>(v.id);
    if (i < tangent_.size() && tangent_[i] >= 0) return {tape_, tangent_[i]};
    return tape_->constant(Matrix(tape_->shape(v.id)));
  }
  bool depends(Var v) const {
    const auto i = static_cast<std::size_t>(v.id);
    return i < tangent_.size() && tangent_[i] >= 0;
  }

 private:
  Tape* tape_;
  std::vector<int> tangent_;
};

// Tangents are propagated through nodes input..until (inclusive); `until`
// defaults to the last node recorded so far.
inline Jvp jvp(Tape& tape, Var input, const Matrix& direction, Var until = {}) {
  detail::require(input.tape == &tape, "jvp: input node from another tape");
  detail::require(until.id < 0 || (until.tape == &tape && until.id >= input.id),
                  "jvp: `until` must be recorded after the input on the same tape");
  detail::require(direction.shape() == tape.shape(input.id),
                  "jvp: tangent shape " + direction.shape().str() + " does not match input " +
                      tape.shape(input.id).str());
  const int end = until.id < 0 ? static_cast<int>(tape.size()) : until.id + 1;
  std::vector<int> t(static_cast<std::size_t>(end), -1);
  t[static_cast<std::size_t>(input.id)] = tape.constant(direction).id;

  auto tv = [&](int id) -> Var { return {&tape, id < 0 ? -1 : t[static_cast<std::size_t>(id)]}; };
  auto has = [&](int id) { return id >= 0 && t[static_cast<std::size_t>(id)] >= 0; };
  auto self = [&](int id) -> Var { return {&tape, id}; };

  for (int id = input.id + 1; id < end; ++id) {
    // Copy metadata only: the node vector grows while tangents are recorded.
    struct {
      Op op;
      int a, b;
      double scale;
      std::size_t index;
    } n{tape.node(id).op, tape.node(id).a, tape.node(id).b, tape.node(id).scale, tape.node(id).index};
    const bool ha = has(n.a), hb = has(n.b);
    if (!ha && !hb) continue;
    const Shape out = tape.shape(id);
    auto widen = [&](Var v) {
      // Broadcast a lower-rank tangent up to this node's shape.
      return tape.shape(v.id) == out ? v : tape.constant(Matrix(out)) + v;
    };
    Var r;
    switch (n.op) {
      case Op::Input:
      case Op::Constant:
      case Op::Param: continue;
      case Op::Add:
        r = ha && hb ? tv(n.a) + tv(n.b) : widen(ha ? tv(n.a) : tv(n.b));
        break;
      case Op::Sub:
        if (ha && hb) r = tv(n.a) - tv(n.b);
        else if (ha) r = widen(tv(n.a));
        else r = widen(affine(tv(n.b), -1.0, 0.0));
        break;
      case Op::Mul:
        if (ha && hb) r = tv(n.a) * self(n.b) + self(n.a) * tv(n.b);
        else if (ha) r = widen(tv(n.a) * self(n.b));
        else r = widen(self(n.a) * tv(n.b));
        break;
      case Op::MatMul:
        if (ha && hb) r = matmul(tv(n.a), self(n.b)) + matmul(self(n.a), tv(n.b));
        else if (ha) r = matmul(tv(n.a), self(n.b));
        else r = matmul(self(n.a), tv(n.b));
        break;
      case Op::Tanh: r = tv(n.a) * affine(square(self(id)), -1.0, 1.0); break;
      case Op::Square: r = 2.0 * (self(n.a) * tv(n.a)); break;
      case Op::Rsqrt: {
        Var y = self(id);
        r = affine(square(y) * y, -0.5, 0.0) * tv(n.a);
        break;
      }
      case Op::Affine: r = affine(tv(n.a), n.scale, 0.0); break;
      case Op::Sum: r = sum(tv(n.a)); break;
      case Op::RowSum: r = row_sum(tv(n.a)); break;
      case Op::RowMean: r = row_mean(tv(n.a)); break;
      case Op::GatherCol: r = gather_col(tv(n.a), n.index); break;
    }
    t[static_cast<std::size_t>(id)] = r.id;
  }
  return Jvp(tape, std::move(t));
}

}  // namespace bridgekit::ad
