#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"

namespace slfc {

/// Reverse-mode differentiation tape. Nodes are matrix-granular: each op
/// computes its forward value eagerly at record time, and backward() walks
/// the node list in reverse (construction order is already topological).
class Tape {
 public:
  using NodeId = std::int32_t;

  enum class Op : std::uint8_t {
    kLeaf, kConst,
    kAdd, kSub, kMul, kDiv,
    kAddRow, kSubRow, kRsubRow, kMulRow, kDivRow,
    kSubCol, kMulCol,
    kScale, kAddScalar,
    kNeg, kTanh, kSoftplus, kExp, kLog, kSqrt, kSquare,
    kMatmul, kMatmulNT,
    kSliceCols, kSliceRows, kConcatCols,
    kRowSum, kSumAll, kMeanAll, kRowLogSumExp,
    kGaussRowLogPdf,
  };

  NodeId leaf(Matrix value) { return push(Op::kLeaf, std::move(value), -1, -1, true); }
  NodeId constant(Matrix value) { return push(Op::kConst, std::move(value), -1, -1, false); }

  // -- elementwise binary, equal shapes ------------------------------------
  NodeId add(NodeId a, NodeId b) { return binary(Op::kAdd, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary(Op::kSub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary(Op::kMul, a, b); }
  NodeId div(NodeId a, NodeId b) { return binary(Op::kDiv, a, b); }

  // -- broadcast against a [1 x n] row -------------------------------------
  NodeId add_row(NodeId x, NodeId r) { return rowwise(Op::kAddRow, x, r); }
  NodeId sub_row(NodeId x, NodeId r) { return rowwise(Op::kSubRow, x, r); }
  /// r - X with r broadcast over rows.
  NodeId rsub_row(NodeId x, NodeId r) { return rowwise(Op::kRsubRow, x, r); }
  NodeId mul_row(NodeId x, NodeId r) { return rowwise(Op::kMulRow, x, r); }
  NodeId div_row(NodeId x, NodeId r) { return rowwise(Op::kDivRow, x, r); }

  // -- broadcast against a [m x 1] column ----------------------------------
  NodeId sub_col(NodeId x, NodeId c) { return colwise(Op::kSubCol, x, c); }
  NodeId mul_col(NodeId x, NodeId c) { return colwise(Op::kMulCol, x, c); }

  // -- literal scalar ops ----------------------------------------------------
  NodeId scale(NodeId a, double s) {
    NodeId id = push(Op::kScale, Matrix(), a, -1, nodes_[a].requires_grad);
    nodes_[id].payload = s;
    Matrix v = nodes_[a].value;
    for (auto& x : v.storage()) x *= s;
    nodes_[id].value = std::move(v);
    return id;
  }
  NodeId add_scalar(NodeId a, double s) {
    NodeId id = push(Op::kAddScalar, Matrix(), a, -1, nodes_[a].requires_grad);
    nodes_[id].payload = s;
    Matrix v = nodes_[a].value;
    for (auto& x : v.storage()) x += s;
    nodes_[id].value = std::move(v);
    return id;
  }

  // -- unary -----------------------------------------------------------------
  NodeId neg(NodeId a) { return unary(Op::kNeg, a, [](double x) { return -x; }); }
  NodeId tanh(NodeId a) { return unary(Op::kTanh, a, [](double x) { return std::tanh(x); }); }
  NodeId softplus(NodeId a) {
    return unary(Op::kSoftplus, a, [](double x) {
      return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    });
  }
  NodeId exp(NodeId a) { return unary(Op::kExp, a, [](double x) { return std::exp(x); }); }
  NodeId log(NodeId a) { return unary(Op::kLog, a, [](double x) { return std::log(x); }); }
  NodeId sqrt(NodeId a) { return unary(Op::kSqrt, a, [](double x) { return std::sqrt(x); }); }
  NodeId square(NodeId a) { return unary(Op::kSquare, a, [](double x) { return x * x; }); }

  // -- matrix product ---------------------------------------------------------
  NodeId matmul(NodeId a, NodeId b) {
    NodeId id = push(Op::kMatmul, slfc::matmul(nodes_[a].value, nodes_[b].value), a, b,
                     nodes_[a].requires_grad || nodes_[b].requires_grad);
    return id;
  }
  /// A * B^T
  NodeId matmul_nt(NodeId a, NodeId b) {
    NodeId id = push(Op::kMatmulNT, slfc::matmul_nt(nodes_[a].value, nodes_[b].value), a, b,
                     nodes_[a].requires_grad || nodes_[b].requires_grad);
    return id;
  }

  // -- structure ---------------------------------------------------------------
  NodeId slice_cols(NodeId a, std::size_t j0, std::size_t j1) {
    const Matrix& x = nodes_[a].value;
    if (j1 > x.cols() || j0 >= j1) throw ShapeError("slice_cols: bad range");
    Matrix out(x.rows(), j1 - j0);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = j0; j < j1; ++j) out(i, j - j0) = x(i, j);
    NodeId id = push(Op::kSliceCols, std::move(out), a, -1, nodes_[a].requires_grad);
    nodes_[id].i0 = j0;
    nodes_[id].i1 = j1;
    return id;
  }

  NodeId slice_rows(NodeId a, std::size_t i0, std::size_t i1) {
    const Matrix& x = nodes_[a].value;
    if (i1 > x.rows() || i0 >= i1) throw ShapeError("slice_rows: bad range");
    Matrix out(i1 - i0, x.cols());
    for (std::size_t i = i0; i < i1; ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i - i0, j) = x(i, j);
    NodeId id = push(Op::kSliceRows, std::move(out), a, -1, nodes_[a].requires_grad);
    nodes_[id].i0 = i0;
    nodes_[id].i1 = i1;
    return id;
  }

  NodeId concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    std::size_t rows = nodes_[parts[0]].value.rows();
    std::size_t cols = 0;
    bool grad = false;
    for (NodeId p : parts) {
      if (nodes_[p].value.rows() != rows) throw ShapeError("concat_cols: row mismatch");
      cols += nodes_[p].value.cols();
      grad = grad || nodes_[p].requires_grad;
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (NodeId p : parts) {
      const Matrix& x = nodes_[p].value;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, off + j) = x(i, j);
      off += x.cols();
    }
    NodeId id = push(Op::kConcatCols, std::move(out), -1, -1, grad);
    nodes_[id].multi = parts;
    return id;
  }

  // -- reductions -----------------------------------------------------------------
  NodeId row_sum(NodeId a) {
    const Matrix& x = nodes_[a].value;
    Matrix out(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) acc += x(i, j);
      out(i, 0) = acc;
    }
    return push(Op::kRowSum, std::move(out), a, -1, nodes_[a].requires_grad);
  }

  NodeId sum_all(NodeId a) {
    const Matrix& x = nodes_[a].value;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    Matrix out(1, 1);
    out(0, 0) = acc;
    return push(Op::kSumAll, std::move(out), a, -1, nodes_[a].requires_grad);
  }

  NodeId mean_all(NodeId a) {
    const Matrix& x = nodes_[a].value;
    if (x.size() == 0) throw ShapeError("mean_all: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    Matrix out(1, 1);
    out(0, 0) = acc / static_cast<double>(x.size());
    return push(Op::kMeanAll, std::move(out), a, -1, nodes_[a].requires_grad);
  }

  /// Row-wise logsumexp: [m x n] -> [m x 1], max-subtracted.
  NodeId row_logsumexp(NodeId a) {
    const Matrix& x = nodes_[a].value;
    Matrix out(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double m = x(i, 0);
      for (std::size_t j = 1; j < x.cols(); ++j) m = std::max(m, x(i, j));
      double acc = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) acc += std::exp(x(i, j) - m);
      out(i, 0) = m + std::log(acc);
    }
    return push(Op::kRowLogSumExp, std::move(out), a, -1, nodes_[a].requires_grad);
  }

  /// Row-wise diagonal-Gaussian log-density of a constant observation block:
  /// out_i = sum_j [ -1/2 ln(2 pi V_ij) - (x_ij - M_ij)^2 / (2 V_ij) ].
  NodeId gauss_row_logpdf(const Matrix& x, NodeId mean, NodeId var) {
    const Matrix& m = nodes_[mean].value;
    const Matrix& v = nodes_[var].value;
    if (!x.same_shape(m) || !x.same_shape(v))
      throw ShapeError("gauss_row_logpdf: shape mismatch");
    Matrix out(x.rows(), 1);
    constexpr double kLog2PiLocal = 1.8378770664093453;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) {
        double d = x(i, j) - m(i, j);
        acc += -0.5 * (kLog2PiLocal + std::log(v(i, j))) - 0.5 * d * d / v(i, j);
      }
      out(i, 0) = acc;
    }
    NodeId id = push(Op::kGaussRowLogPdf, std::move(out), mean, var,
                     nodes_[mean].requires_grad || nodes_[var].requires_grad);
    nodes_[id].aux = x;
    return id;
  }

  // -- access ------------------------------------------------------------------
  const Matrix& value(NodeId id) const { return nodes_[id].value; }
  double scalar_value(NodeId id) const {
    const Matrix& v = nodes_[id].value;
    if (v.rows() != 1 || v.cols() != 1) throw ContractError("scalar_value: node is not 1x1");
    return v(0, 0);
  }
  std::size_t node_count() const { return nodes_.size(); }
  void reset() { nodes_.clear(); }

  /// Adjoints of every gradient-requiring node with respect to a scalar loss.
  /// Index the result by NodeId; leaves never reached stay zero.
  std::vector<Matrix> backward(NodeId loss) const {
    const Matrix& lv = nodes_[loss].value;
    if (lv.rows() != 1 || lv.cols() != 1)
      throw ContractError("backward: loss node must be scalar");
    std::vector<Matrix> adj(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].requires_grad)
        adj[i] = Matrix(nodes_[i].value.rows(), nodes_[i].value.cols());
    adj[loss](0, 0) = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
      const Node& n = nodes_[id];
      if (!n.requires_grad) continue;
      propagate(id, n, adj);
    }
    return adj;
  }

 private:
  struct Node {
    Op op;
    NodeId a = -1, b = -1;
    double payload = 0.0;
    std::size_t i0 = 0, i1 = 0;
    std::vector<NodeId> multi;
    Matrix value;
    Matrix aux;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;

  NodeId push(Op op, Matrix value, NodeId a, NodeId b, bool grad) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.value = std::move(value);
    n.requires_grad = grad;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  template <typename F>
  NodeId unary(Op op, NodeId a, F f) {
    Matrix v = nodes_[a].value;
    for (auto& x : v.storage()) x = f(x);
    return push(op, std::move(v), a, -1, nodes_[a].requires_grad);
  }

  NodeId binary(Op op, NodeId a, NodeId b) {
    const Matrix& x = nodes_[a].value;
    const Matrix& y = nodes_[b].value;
    if (!x.same_shape(y)) throw ShapeError("tape binary op: shape mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
      double xv = x.data()[i], yv = y.data()[i];
      switch (op) {
        case Op::kAdd: out.data()[i] = xv + yv; break;
        case Op::kSub: out.data()[i] = xv - yv; break;
        case Op::kMul: out.data()[i] = xv * yv; break;
        case Op::kDiv: out.data()[i] = xv / yv; break;
        default: throw ContractError("tape binary op: bad op");
      }
    }
    return push(op, std::move(out), a, b,
                nodes_[a].requires_grad || nodes_[b].requires_grad);
  }

  NodeId rowwise(Op op, NodeId xa, NodeId ra) {
    const Matrix& x = nodes_[xa].value;
    const Matrix& r = nodes_[ra].value;
    if (r.rows() != 1 || r.cols() != x.cols())
      throw ShapeError("tape row-broadcast op: row shape mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) {
        double xv = x(i, j), rv = r(0, j);
        switch (op) {
          case Op::kAddRow: out(i, j) = xv + rv; break;
          case Op::kSubRow: out(i, j) = xv - rv; break;
          case Op::kRsubRow: out(i, j) = rv - xv; break;
          case Op::kMulRow: out(i, j) = xv * rv; break;
          case Op::kDivRow: out(i, j) = xv / rv; break;
          default: throw ContractError("tape row op: bad op");
        }
      }
    return push(op, std::move(out), xa, ra,
                nodes_[xa].requires_grad || nodes_[ra].requires_grad);
  }

  NodeId colwise(Op op, NodeId xa, NodeId ca) {
    const Matrix& x = nodes_[xa].value;
    const Matrix& c = nodes_[ca].value;
    if (c.cols() != 1 || c.rows() != x.rows())
      throw ShapeError("tape col-broadcast op: column shape mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) {
        double xv = x(i, j), cv = c(i, 0);
        switch (op) {
          case Op::kSubCol: out(i, j) = xv - cv; break;
          case Op::kMulCol: out(i, j) = xv * cv; break;
          default: throw ContractError("tape col op: bad op");
        }
      }
    return push(op, std::move(out), xa, ca,
                nodes_[xa].requires_grad || nodes_[ca].requires_grad);
  }

  static void accumulate(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
  }

  bool grad(NodeId id) const { return id >= 0 && nodes_[id].requires_grad; }

  void propagate(NodeId id, const Node& n, std::vector<Matrix>& adj) const {
    const Matrix& g = adj[id];
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kAdd:
        if (grad(n.a)) accumulate(adj[n.a], g);
        if (grad(n.b)) accumulate(adj[n.b], g);
        break;
      case Op::kSub:
        if (grad(n.a)) accumulate(adj[n.a], g);
        if (grad(n.b))
          for (std::size_t i = 0; i < g.size(); ++i) adj[n.b].data()[i] -= g.data()[i];
        break;
      case Op::kMul: {
        const Matrix& x = nodes_[n.a].value;
        const Matrix& y = nodes_[n.b].value;
        if (grad(n.a))
          for (std::size_t i = 0; i < g.size(); ++i)
            adj[n.a].data()[i] += g.data()[i] * y.data()[i];
        if (grad(n.b))
          for (std::size_t i = 0; i < g.size(); ++i)
            adj[n.b].data()[i] += g.data()[i] * x.data()[i];
        break;
      }
      case Op::kDiv: {
        const Matrix& y = nodes_[n.b].value;
        const Matrix& out = n.value;
        if (grad(n.a))
          for (std::size_t i = 0; i < g.size(); ++i)
            adj[n.a].data()[i] += g.data()[i] / y.data()[i];
        if (grad(n.b))
          for (std::size_t i = 0; i < g.size(); ++i)
            adj[n.b].data()[i] -= g.data()[i] * out.data()[i] / y.data()[i];
        break;
      }
      case Op::kAddRow:
      case Op::kSubRow:
      case Op::kRsubRow:
      case Op::kMulRow:
      case Op::kDivRow: {
        const Matrix& x = nodes_[n.a].value;
        const Matrix& r = nodes_[n.b].value;
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) {
            double gij = g(i, j);
            double dx = 0.0, dr = 0.0;
            switch (n.op) {
              case Op::kAddRow: dx = gij; dr = gij; break;
              case Op::kSubRow: dx = gij; dr = -gij; break;
              case Op::kRsubRow: dx = -gij; dr = gij; break;
              case Op::kMulRow: dx = gij * r(0, j); dr = gij * x(i, j); break;
              case Op::kDivRow:
                dx = gij / r(0, j);
                dr = -gij * x(i, j) / (r(0, j) * r(0, j));
                break;
              default: break;
            }
            if (grad(n.a)) adj[n.a](i, j) += dx;
            if (grad(n.b)) adj[n.b](0, j) += dr;
          }
        break;
      }
      case Op::kSubCol:
      case Op::kMulCol: {
        const Matrix& x = nodes_[n.a].value;
        const Matrix& c = nodes_[n.b].value;
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) {
            double gij = g(i, j);
            if (n.op == Op::kSubCol) {
              if (grad(n.a)) adj[n.a](i, j) += gij;
              if (grad(n.b)) adj[n.b](i, 0) -= gij;
            } else {
              if (grad(n.a)) adj[n.a](i, j) += gij * c(i, 0);
              if (grad(n.b)) adj[n.b](i, 0) += gij * x(i, j);
            }
          }
        break;
      }
      case Op::kScale:
        if (grad(n.a))
          for (std::size_t i = 0; i < g.size(); ++i)
            adj[n.a].data()[i] += n.payload * g.data()[i];
        break;
      case Op::kAddScalar:
        if (grad(n.a)) accumulate(adj[n.a], g);
        break;
      case Op::kNeg:
        if (grad(n.a))
          for (std::size_t i = 0; i < g.size(); ++i) adj[n.a].data()[i] -= g.data()[i];
        break;
      case Op::kTanh: {
        const Matrix& y = n.value;
        if (grad(n.a))
          for (std::size_t i = 0; i < g.size(); ++i)
            adj[n.a].data()[i] += g.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
        break;
      }
      case Op::kSoftplus: {
        const Matrix& x = nodes_[n.a].value;
        if (grad(n.a))
          for (std::size_t i = 0; i < g.size(); ++i) {
            double sig = 1.0 / (1.0 + std::exp(-x.data()[i]));
            adj[n.a].data()[i] += g.data()[i] * sig;
          }
        break;
      }
      case Op::kExp: {
        const Matrix& y = n.value;
        if (grad(n.a))
          for (std::size_t i = 0; i < g.size(); ++i)
            adj[n.a].data()[i] += g.data()[i] * y.data()[i];
        break;
      }
      case Op::kLog: {
        const Matrix& x = nodes_[n.a].value;
        if (grad(n.a))
          for (std::size_t i = 0; i < g.size(); ++i)
            adj[n.a].data()[i] += g.data()[i] / x.data()[i];
        break;
      }
      case Op::kSqrt: {
        const Matrix& y = n.value;
        if (grad(n.a))
          for (std::size_t i = 0; i < g.size(); ++i)
            adj[n.a].data()[i] += g.data()[i] / (2.0 * y.data()[i]);
        break;
      }
      case Op::kSquare: {
        const Matrix& x = nodes_[n.a].value;
        if (grad(n.a))
          for (std::size_t i = 0; i < g.size(); ++i)
            adj[n.a].data()[i] += 2.0 * g.data()[i] * x.data()[i];
        break;
      }
      case Op::kMatmul: {
        // C = A B: dA += g B^T, dB += A^T g
        if (grad(n.a)) accumulate(adj[n.a], slfc::matmul_nt(g, nodes_[n.b].value));
        if (grad(n.b)) accumulate(adj[n.b], slfc::matmul_tn(nodes_[n.a].value, g));
        break;
      }
      case Op::kMatmulNT: {
        // C = A B^T: dA += g B, dB += g^T A
        if (grad(n.a)) accumulate(adj[n.a], slfc::matmul(g, nodes_[n.b].value));
        if (grad(n.b)) accumulate(adj[n.b], slfc::matmul_tn(g, nodes_[n.a].value));
        break;
      }
      case Op::kSliceCols: {
        if (grad(n.a))
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) adj[n.a](i, n.i0 + j) += g(i, j);
        break;
      }
      case Op::kSliceRows: {
        if (grad(n.a))
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) adj[n.a](n.i0 + i, j) += g(i, j);
        break;
      }
      case Op::kConcatCols: {
        std::size_t off = 0;
        for (NodeId p : n.multi) {
          const Matrix& xv = nodes_[p].value;
          if (grad(p))
            for (std::size_t i = 0; i < xv.rows(); ++i)
              for (std::size_t j = 0; j < xv.cols(); ++j) adj[p](i, j) += g(i, off + j);
          off += xv.cols();
        }
        break;
      }
      case Op::kRowSum: {
        const Matrix& x = nodes_[n.a].value;
        if (grad(n.a))
          for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) adj[n.a](i, j) += g(i, 0);
        break;
      }
      case Op::kSumAll: {
        if (grad(n.a)) {
          double gv = g(0, 0);
          for (std::size_t i = 0; i < adj[n.a].size(); ++i) adj[n.a].data()[i] += gv;
        }
        break;
      }
      case Op::kMeanAll: {
        if (grad(n.a)) {
          double gv = g(0, 0) / static_cast<double>(nodes_[n.a].value.size());
          for (std::size_t i = 0; i < adj[n.a].size(); ++i) adj[n.a].data()[i] += gv;
        }
        break;
      }
      case Op::kRowLogSumExp: {
        const Matrix& x = nodes_[n.a].value;
        const Matrix& y = n.value;
        if (grad(n.a))
          for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j)
              adj[n.a](i, j) += g(i, 0) * std::exp(x(i, j) - y(i, 0));
        break;
      }
      case Op::kGaussRowLogPdf: {
        const Matrix& x = n.aux;
        const Matrix& m = nodes_[n.a].value;
        const Matrix& v = nodes_[n.b].value;
        for (std::size_t i = 0; i < x.rows(); ++i) {
          double gi = g(i, 0);
          for (std::size_t j = 0; j < x.cols(); ++j) {
            double d = x(i, j) - m(i, j), vij = v(i, j);
            if (grad(n.a)) adj[n.a](i, j) += gi * d / vij;
            if (grad(n.b)) adj[n.b](i, j) += gi * (0.5 * d * d / (vij * vij) - 0.5 / vij);
          }
        }
        break;
      }
    }
  }
};

}  // namespace slfc
