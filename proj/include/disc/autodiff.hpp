#pragma once

#include "disc/tensor.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace disc {

// Reverse-mode tape over dense matrix-valued nodes. Values are computed
// eagerly at record time; backward() runs one reverse sweep and returns the
// gradient of a scalar root with respect to every parameter leaf. Nodes hold
// whole mini-batches (rows = samples), so the sweep is a short sequence of
// dense matrix ops rather than a long scalar graph.
class Tape {
 public:
  enum class Op {
    kConstant,
    kParam,
    kAffine,        // y = x * W^T + 1 b^T
    kTanh,
    kExp,
    kLog,
    kSquare,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kScale,         // y = s0 * x
    kAddScalar,     // y = x + s0
    kBroadcast,     // replicate 1 x n or 1 x 1 (or n x 1) to rows x cols
    kRowSum,        // m x n -> m x 1
    kRowProd,       // m x n -> m x 1
    kSumAll,        // m x n -> 1 x 1
    kMeanAll,       // m x n -> 1 x 1
    kClip,          // clip(x, s0, s1); gradient passes on [s0, s1] inclusive
    kMin,           // elementwise min(a, b); ties route the gradient to a
  };

  struct NodeRef {
    int index = -1;
  };

  explicit Tape(const ParamStore& params) : params_(&params) {}

  // -- leaves -- //

  NodeRef constant(Matrix v) {
    Node n;
    n.op = Op::kConstant;
    n.value = std::move(v);
    return push(std::move(n));
  }

  NodeRef scalar(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  // Parameter leaf bound to a named tensor of the store. Repeated requests
  // return the same node so gradients accumulate in one place.
  NodeRef param(const std::string& name) {
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return {it->second};
    const Tensor& t = params_->at(name);
    Node n;
    n.op = Op::kParam;
    n.value = t.mat();
    n.param_index = params_->index_of(name);
    NodeRef ref = push(std::move(n));
    param_nodes_.emplace(name, ref.index);
    return ref;
  }

  // -- primitives -- //

  NodeRef affine(NodeRef x, NodeRef w, NodeRef b) {
    const Matrix& xv = value(x);
    const Matrix& wv = value(w);
    const Matrix& bv = value(b);
    if (xv.cols() != wv.cols())
      throw std::invalid_argument("affine: input width does not match weight fan-in");
    if (bv.rows() != 1 || bv.cols() != wv.rows())
      throw std::invalid_argument("affine: bias shape does not match weight fan-out");
    Node n;
    n.op = Op::kAffine;
    n.a = x.index;
    n.b = w.index;
    n.c = b.index;
    n.value.noalias() = xv * wv.transpose();
    n.value.rowwise() += bv.row(0);
    return push(std::move(n));
  }

  NodeRef tanh(NodeRef x) { return unary(Op::kTanh, x, value(x).array().tanh()); }
  NodeRef exp(NodeRef x) { return unary(Op::kExp, x, value(x).array().exp()); }
  NodeRef log(NodeRef x) { return unary(Op::kLog, x, value(x).array().log()); }
  NodeRef square(NodeRef x) { return unary(Op::kSquare, x, value(x).array().square()); }

  NodeRef add(NodeRef a, NodeRef b) { return binary(Op::kAdd, a, b, value(a) + value(b)); }
  NodeRef sub(NodeRef a, NodeRef b) { return binary(Op::kSub, a, b, value(a) - value(b)); }
  NodeRef mul(NodeRef a, NodeRef b) {
    return binary(Op::kMul, a, b, value(a).cwiseProduct(value(b)));
  }
  NodeRef div(NodeRef a, NodeRef b) {
    return binary(Op::kDiv, a, b, value(a).cwiseQuotient(value(b)));
  }

  NodeRef scale(NodeRef x, double s) {
    Node n;
    n.op = Op::kScale;
    n.a = x.index;
    n.s0 = s;
    n.value = s * value(x);
    return push(std::move(n));
  }

  NodeRef add_scalar(NodeRef x, double s) {
    Node n;
    n.op = Op::kAddScalar;
    n.a = x.index;
    n.s0 = s;
    n.value = value(x).array() + s;
    return push(std::move(n));
  }

  NodeRef broadcast(NodeRef v, Eigen::Index rows, Eigen::Index cols) {
    const Matrix& vv = value(v);
    if (rows % vv.rows() != 0 || cols % vv.cols() != 0)
      throw std::invalid_argument("broadcast: target shape is not a multiple of the input");
    Node n;
    n.op = Op::kBroadcast;
    n.a = v.index;
    n.value = vv.replicate(rows / vv.rows(), cols / vv.cols());
    return push(std::move(n));
  }

  NodeRef broadcast_row(NodeRef v, Eigen::Index rows) {
    const Matrix& vv = value(v);
    if (vv.rows() != 1) throw std::invalid_argument("broadcast_row: input must be 1 x n");
    return broadcast(v, rows, vv.cols());
  }

  NodeRef row_sum(NodeRef x) {
    Node n;
    n.op = Op::kRowSum;
    n.a = x.index;
    n.value = value(x).rowwise().sum();
    return push(std::move(n));
  }

  NodeRef row_prod(NodeRef x) {
    Node n;
    n.op = Op::kRowProd;
    n.a = x.index;
    n.value = value(x).rowwise().prod();
    return push(std::move(n));
  }

  NodeRef sum_all(NodeRef x) {
    Node n;
    n.op = Op::kSumAll;
    n.a = x.index;
    n.value.resize(1, 1);
    n.value(0, 0) = value(x).sum();
    return push(std::move(n));
  }

  NodeRef mean_all(NodeRef x) {
    Node n;
    n.op = Op::kMeanAll;
    n.a = x.index;
    n.value.resize(1, 1);
    n.value(0, 0) = value(x).mean();
    return push(std::move(n));
  }

  NodeRef clip(NodeRef x, double lo, double hi) {
    Node n;
    n.op = Op::kClip;
    n.a = x.index;
    n.s0 = lo;
    n.s1 = hi;
    n.value = value(x).array().max(lo).min(hi);
    return push(std::move(n));
  }

  NodeRef min(NodeRef a, NodeRef b) {
    return binary(Op::kMin, a, b, value(a).cwiseMin(value(b)));
  }

  // -- access -- //

  const Matrix& value(NodeRef r) const { return nodes_[check(r)].value; }

  double scalar_value(NodeRef r) const {
    const Matrix& v = value(r);
    if (v.size() != 1) throw std::invalid_argument("scalar_value: node is not scalar");
    return v(0, 0);
  }

  std::size_t size() const { return nodes_.size(); }

  // Gradient of a scalar root with respect to every parameter leaf.
  // Subgradients: clip passes the gradient on the closed interval [lo, hi]
  // and kills it outside; min routes the gradient to the smaller argument
  // and to the first argument on ties.
  GradStore backward(NodeRef root) {
    const int ri = check(root);
    Node& rn = nodes_[static_cast<std::size_t>(ri)];
    if (rn.value.size() != 1) throw std::invalid_argument("backward: root must be scalar");

    // constants take no gradient; skipping their adjoints avoids touching the
    // large minibatch data matrices during the sweep
    for (Node& n : nodes_) {
      if (n.op == Op::kConstant)
        n.adjoint.resize(0, 0);
      else
        n.adjoint.setZero(n.value.rows(), n.value.cols());
    }
    rn.adjoint.setZero(1, 1);
    rn.adjoint(0, 0) = 1.0;

    for (int i = ri; i >= 0; --i) propagate(nodes_[static_cast<std::size_t>(i)]);

    GradStore grads = params_->zeros_like();
    for (const Node& n : nodes_) {
      if (n.op != Op::kParam) continue;
      Tensor& g = grads.tensors()[static_cast<std::size_t>(n.param_index)];
      g.mat() += n.adjoint;
    }
    if (!grads.all_finite())
      throw std::runtime_error("backward: non-finite gradient in reverse sweep");
    return grads;
  }

 private:
  struct Node {
    Op op = Op::kConstant;
    Matrix value;
    Matrix adjoint;
    int a = -1, b = -1, c = -1;
    double s0 = 0.0, s1 = 0.0;
    int param_index = -1;
  };

  NodeRef unary(Op op, NodeRef x, Matrix v) {
    Node n;
    n.op = op;
    n.a = x.index;
    n.value = std::move(v);
    return push(std::move(n));
  }

  NodeRef binary(Op op, NodeRef a, NodeRef b, Matrix v) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.rows() != bv.rows() || av.cols() != bv.cols())
      throw std::invalid_argument("elementwise op: operand shapes differ");
    Node n;
    n.op = op;
    n.a = a.index;
    n.b = b.index;
    n.value = std::move(v);
    return push(std::move(n));
  }

  NodeRef push(Node n) {
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  int check(NodeRef r) const {
    if (r.index < 0 || r.index >= static_cast<int>(nodes_.size()))
      throw std::out_of_range("node ref out of range");
    return r.index;
  }

  Matrix& adj(int i) { return nodes_[static_cast<std::size_t>(i)].adjoint; }
  const Matrix& val(int i) const { return nodes_[static_cast<std::size_t>(i)].value; }

  bool takes_grad(int i) const {
    return nodes_[static_cast<std::size_t>(i)].op != Op::kConstant;
  }

  void propagate(Node& n) {
    const Matrix& g = n.adjoint;
    const bool ga = n.a >= 0 && takes_grad(n.a);
    const bool gb = n.b >= 0 && takes_grad(n.b);
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kAffine: {
        const Matrix& x = val(n.a);
        const Matrix& w = val(n.b);
        if (ga) adj(n.a).noalias() += g * w;
        if (gb) adj(n.b).noalias() += g.transpose() * x;
        if (takes_grad(n.c)) adj(n.c) += g.colwise().sum();
        break;
      }
      case Op::kTanh:
        if (ga) adj(n.a).array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::kExp:
        if (ga) adj(n.a).array() += g.array() * n.value.array();
        break;
      case Op::kLog:
        if (ga) adj(n.a).array() += g.array() / val(n.a).array();
        break;
      case Op::kSquare:
        if (ga) adj(n.a).array() += 2.0 * g.array() * val(n.a).array();
        break;
      case Op::kAdd:
        if (ga) adj(n.a) += g;
        if (gb) adj(n.b) += g;
        break;
      case Op::kSub:
        if (ga) adj(n.a) += g;
        if (gb) adj(n.b) -= g;
        break;
      case Op::kMul:
        if (ga) adj(n.a).array() += g.array() * val(n.b).array();
        if (gb) adj(n.b).array() += g.array() * val(n.a).array();
        break;
      case Op::kDiv: {
        const auto& b = val(n.b).array();
        if (ga) adj(n.a).array() += g.array() / b;
        if (gb) adj(n.b).array() -= g.array() * n.value.array() / b;
        break;
      }
      case Op::kScale:
        if (ga) adj(n.a) += n.s0 * g;
        break;
      case Op::kAddScalar:
        if (ga) adj(n.a) += g;
        break;
      case Op::kBroadcast: {
        if (!ga) break;
        Matrix& gm = adj(n.a);
        const Eigen::Index br = gm.rows(), bc = gm.cols();
        for (Eigen::Index i = 0; i < g.rows(); i += br)
          for (Eigen::Index j = 0; j < g.cols(); j += bc) gm += g.block(i, j, br, bc);
        break;
      }
      case Op::kRowSum:
        if (ga) adj(n.a).colwise() += g.col(0);
        break;
      case Op::kRowProd: {
        // prefix/suffix products avoid dividing by (possibly tiny) entries
        if (!ga) break;
        const Matrix& x = val(n.a);
        Matrix& gx = adj(n.a);
        const Eigen::Index cols = x.cols();
        std::vector<double> suffix(static_cast<std::size_t>(cols) + 1);
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
          suffix[static_cast<std::size_t>(cols)] = 1.0;
          for (Eigen::Index c = cols - 1; c >= 0; --c)
            suffix[static_cast<std::size_t>(c)] =
                x(r, c) * suffix[static_cast<std::size_t>(c) + 1];
          double prefix = 1.0;
          const double gr = g(r, 0);
          for (Eigen::Index c = 0; c < cols; ++c) {
            gx(r, c) += gr * (prefix * suffix[static_cast<std::size_t>(c) + 1]);
            prefix *= x(r, c);
          }
        }
        break;
      }
      case Op::kSumAll:
        if (ga) adj(n.a).array() += g(0, 0);
        break;
      case Op::kMeanAll:
        if (ga) adj(n.a).array() += g(0, 0) / static_cast<double>(val(n.a).size());
        break;
      case Op::kClip: {
        if (!ga) break;
        const auto& x = val(n.a).array();
        adj(n.a).array() += g.array() * ((x >= n.s0 && x <= n.s1).cast<double>());
        break;
      }
      case Op::kMin: {
        const auto& a = val(n.a).array();
        const auto& b = val(n.b).array();
        if (ga) adj(n.a).array() += g.array() * (a <= b).cast<double>();
        if (gb) adj(n.b).array() += g.array() * (a > b).cast<double>();
        break;
      }
    }
  }

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_nodes_;
};

using NodeRef = Tape::NodeRef;

}  // namespace disc
