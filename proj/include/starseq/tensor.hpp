#pragma once

// Dense-tensor numeric core with reverse-mode automatic differentiation.
// Values are row-major Eigen matrices (row vectors are 1xk, scalars 1x1);
// a Graph records executed operations in append order and replays them in
// reverse to accumulate gradients. Templated on the scalar type; double is
// the project-wide default (see starseq::Real).

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "starseq/common.hpp"

namespace starseq {

using Index = Eigen::Index;

template <typename Scalar>
using DenseMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { Relu, Gelu };

inline const char* to_string(Activation a) {
  return a == Activation::Relu ? "relu" : "gelu";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "gelu") return Activation::Gelu;
  throw ConfigError("unknown activation '" + s + "' (expected relu|gelu)");
}

// ---------------------------------------------------------------------------
// Tensor: a value plus an optional same-shape gradient accumulator. Leaf
// tensors (parameters, inputs) live outside any Graph and survive across
// forward passes; grads accumulate until zero_grad().
// ---------------------------------------------------------------------------

template <typename Scalar>
struct TensorT {
  DenseMatrix<Scalar> value;
  DenseMatrix<Scalar> grad;  // 0x0 until the first accumulation
  bool requires_grad = false;

  TensorT() = default;
  TensorT(Index rows, Index cols, bool rg = false)
      : value(DenseMatrix<Scalar>::Zero(rows, cols)), requires_grad(rg) {}
  explicit TensorT(DenseMatrix<Scalar> v, bool rg = false)
      : value(std::move(v)), requires_grad(rg) {}

  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
  Index size() const { return value.size(); }

  void zero_grad() {
    if (grad.size() != 0) grad.setZero();
  }

  void accumulate_grad(const DenseMatrix<Scalar>& g) {
    if (!requires_grad) return;
    if (g.rows() != value.rows() || g.cols() != value.cols()) {
      throw DimensionError("gradient shape does not match tensor shape");
    }
    if (grad.size() == 0) grad = DenseMatrix<Scalar>::Zero(value.rows(), value.cols());
    grad += g;
  }
};

template <typename Scalar>
class GraphT;

// Lightweight handle to one node of a GraphT; copyable, valid while the graph
// lives.
template <typename Scalar>
class VarT {
 public:
  VarT() = default;
  VarT(GraphT<Scalar>* g, int id) : graph_(g), id_(id) {}

  const DenseMatrix<Scalar>& value() const { return graph_->node(id_).value; }
  const DenseMatrix<Scalar>& grad() const { return graph_->node(id_).grad; }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  GraphT<Scalar>* graph() const { return graph_; }
  int id() const { return id_; }

 private:
  GraphT<Scalar>* graph_ = nullptr;
  int id_ = -1;
};

// ---------------------------------------------------------------------------
// Graph: append-only tape. Node ids are append-order positions; backward
// visits ids in reverse exactly once. A Graph is confined to one thread.
// ---------------------------------------------------------------------------

template <typename Scalar>
class GraphT {
 public:
  using Var = VarT<Scalar>;

  // Pull closure: given this node's accumulated gradient, push contributions
  // into parent nodes via add_grad().
  using PullFn = std::function<void(GraphT&, const DenseMatrix<Scalar>&)>;

  struct Node {
    DenseMatrix<Scalar> value;
    DenseMatrix<Scalar> grad;  // 0x0 until gradient flows here
    bool requires_grad = false;
    TensorT<Scalar>* bound = nullptr;  // leaf tied to an external tensor
    PullFn pull;                       // empty for leaves / grad-free nodes
  };

  // Binds an external tensor as a leaf; backward() adds dLoss/dLeaf into
  // tensor.grad. The tensor must outlive the graph.
  Var leaf(TensorT<Scalar>& t) {
    int id = append(t.value, t.requires_grad, PullFn{});
    nodes_[static_cast<std::size_t>(id)]->bound = &t;
    return Var(this, id);
  }

  // A grad-free constant owned by the graph.
  Var constant(DenseMatrix<Scalar> v) {
    return Var(this, append(std::move(v), false, PullFn{}));
  }

  Var emplace(DenseMatrix<Scalar> value, bool requires_grad, PullFn pull,
              const char* op_name) {
    if (!value.allFinite()) {
      throw NumericalError(std::string(op_name) + " produced a non-finite value");
    }
    return Var(this, append(std::move(value), requires_grad, std::move(pull)));
  }

  void add_grad(int id, const DenseMatrix<Scalar>& g) {
    Node& nd = *nodes_[static_cast<std::size_t>(id)];
    if (!nd.requires_grad) return;
    if (nd.grad.size() == 0) {
      nd.grad = DenseMatrix<Scalar>::Zero(nd.value.rows(), nd.value.cols());
    }
    nd.grad += g;
  }

  Node& node(int id) { return *nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return *nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse-mode sweep from a scalar loss. Internal node gradients are reset
  // first, so repeated calls add exactly one dLoss/dParam into each bound
  // tensor per call (accumulation across calls is intentional; use
  // zero_grad() on the tensors to reset).
  void backward(Var loss) {
    if (loss.graph() != this) throw ContractError("backward: var from another graph");
    Node& top = node(loss.id());
    if (top.value.rows() != 1 || top.value.cols() != 1) {
      throw ContractError("backward requires a scalar (1x1) loss");
    }
    if (!top.requires_grad) return;
    for (int i = 0; i <= loss.id(); ++i) {
      nodes_[static_cast<std::size_t>(i)]->grad.resize(0, 0);
    }
    add_grad(loss.id(), DenseMatrix<Scalar>::Ones(1, 1));
    for (int i = loss.id(); i >= 0; --i) {
      Node& nd = *nodes_[static_cast<std::size_t>(i)];
      if (!nd.requires_grad || nd.grad.size() == 0) continue;
      if (nd.pull) nd.pull(*this, nd.grad);
      if (nd.bound) nd.bound->accumulate_grad(nd.grad);
    }
  }

 private:
  int append(DenseMatrix<Scalar> value, bool requires_grad, PullFn pull) {
    auto nd = std::make_unique<Node>();
    nd->value = std::move(value);
    nd->requires_grad = requires_grad;
    nd->pull = std::move(pull);
    nodes_.push_back(std::move(nd));
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<std::unique_ptr<Node>> nodes_;
};

// ---------------------------------------------------------------------------
// Free operations. Each returns a new Var on the same graph and registers the
// local gradient. Shape mismatches raise DimensionError.
// ---------------------------------------------------------------------------

namespace detail {

template <typename Scalar>
GraphT<Scalar>& same_graph(VarT<Scalar> a, VarT<Scalar> b) {
  if (a.graph() == nullptr || a.graph() != b.graph()) {
    throw ContractError("operands belong to different graphs");
  }
  return *a.graph();
}

inline std::string shape_str(Index r, Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail

template <typename Scalar>
VarT<Scalar> matmul(VarT<Scalar> a, VarT<Scalar> b) {
  auto& g = detail::same_graph(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " +
                         detail::shape_str(a.rows(), a.cols()) + " vs " +
                         detail::shape_str(b.rows(), b.cols()));
  }
  DenseMatrix<Scalar> out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  bool rg = g.node(a.id()).requires_grad || g.node(b.id()).requires_grad;
  int ia = a.id(), ib = b.id();
  auto pull = [ia, ib](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    gr.add_grad(ia, up * gr.node(ib).value.transpose());
    gr.add_grad(ib, gr.node(ia).value.transpose() * up);
  };
  return g.emplace(std::move(out), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "matmul");
}

template <typename Scalar>
VarT<Scalar> transpose(VarT<Scalar> x) {
  auto& g = *x.graph();
  bool rg = g.node(x.id()).requires_grad;
  int ix = x.id();
  auto pull = [ix](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    gr.add_grad(ix, up.transpose());
  };
  return g.emplace(x.value().transpose(), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "transpose");
}

enum class ElemOp { Add, Sub, Mul };

// Elementwise add/sub/mul. Shapes must match, except that a 1xC row vector
// broadcasts over the rows of an RxC matrix (either operand side).
template <typename Scalar>
VarT<Scalar> elementwise(VarT<Scalar> a, VarT<Scalar> b, ElemOp op) {
  auto& g = detail::same_graph(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  bool same = av.rows() == bv.rows() && av.cols() == bv.cols();
  bool bcast_b = !same && bv.rows() == 1 && av.rows() > 1 && av.cols() == bv.cols();
  bool bcast_a = !same && av.rows() == 1 && bv.rows() > 1 && av.cols() == bv.cols();
  if (!same && !bcast_a && !bcast_b) {
    throw DimensionError("elementwise: shapes " +
                         detail::shape_str(av.rows(), av.cols()) + " vs " +
                         detail::shape_str(bv.rows(), bv.cols()));
  }
  DenseMatrix<Scalar> ae = bcast_a ? DenseMatrix<Scalar>(av.replicate(bv.rows(), 1)) : av;
  DenseMatrix<Scalar> be = bcast_b ? DenseMatrix<Scalar>(bv.replicate(av.rows(), 1)) : bv;
  DenseMatrix<Scalar> out;
  switch (op) {
    case ElemOp::Add: out = ae + be; break;
    case ElemOp::Sub: out = ae - be; break;
    case ElemOp::Mul: out = ae.cwiseProduct(be); break;
  }
  bool rg = g.node(a.id()).requires_grad || g.node(b.id()).requires_grad;
  int ia = a.id(), ib = b.id();
  auto pull = [ia, ib, op, bcast_a, bcast_b](GraphT<Scalar>& gr,
                                             const DenseMatrix<Scalar>& up) {
    auto reduce = [](const DenseMatrix<Scalar>& m, bool to_row) -> DenseMatrix<Scalar> {
      if (!to_row) return m;
      return m.colwise().sum();
    };
    switch (op) {
      case ElemOp::Add:
        gr.add_grad(ia, reduce(up, bcast_a));
        gr.add_grad(ib, reduce(up, bcast_b));
        break;
      case ElemOp::Sub:
        gr.add_grad(ia, reduce(up, bcast_a));
        gr.add_grad(ib, reduce(-up, bcast_b));
        break;
      case ElemOp::Mul: {
        const auto& av2 = gr.node(ia).value;
        const auto& bv2 = gr.node(ib).value;
        DenseMatrix<Scalar> ae2 =
            bcast_a ? DenseMatrix<Scalar>(av2.replicate(up.rows(), 1)) : av2;
        DenseMatrix<Scalar> be2 =
            bcast_b ? DenseMatrix<Scalar>(bv2.replicate(up.rows(), 1)) : bv2;
        gr.add_grad(ia, reduce(up.cwiseProduct(be2), bcast_a));
        gr.add_grad(ib, reduce(up.cwiseProduct(ae2), bcast_b));
        break;
      }
    }
  };
  return g.emplace(std::move(out), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "elementwise");
}

template <typename Scalar>
VarT<Scalar> add(VarT<Scalar> a, VarT<Scalar> b) {
  return elementwise(a, b, ElemOp::Add);
}
template <typename Scalar>
VarT<Scalar> sub(VarT<Scalar> a, VarT<Scalar> b) {
  return elementwise(a, b, ElemOp::Sub);
}
template <typename Scalar>
VarT<Scalar> mul(VarT<Scalar> a, VarT<Scalar> b) {
  return elementwise(a, b, ElemOp::Mul);
}

template <typename Scalar>
VarT<Scalar> operator+(VarT<Scalar> a, VarT<Scalar> b) {
  return add(a, b);
}
template <typename Scalar>
VarT<Scalar> operator-(VarT<Scalar> a, VarT<Scalar> b) {
  return sub(a, b);
}

template <typename Scalar>
VarT<Scalar> scale(VarT<Scalar> x, Scalar s) {
  auto& g = *x.graph();
  bool rg = g.node(x.id()).requires_grad;
  int ix = x.id();
  auto pull = [ix, s](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    gr.add_grad(ix, up * s);
  };
  return g.emplace(x.value() * s, rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "scale");
}

namespace detail {

// Branches on sign so exp never overflows.
template <typename Scalar>
Scalar stable_sigmoid(Scalar v) {
  if (v >= 0) return Scalar(1) / (Scalar(1) + std::exp(-v));
  Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

}  // namespace detail

template <typename Scalar>
VarT<Scalar> sigmoid(VarT<Scalar> x) {
  auto& g = *x.graph();
  DenseMatrix<Scalar> y =
      x.value().unaryExpr([](Scalar v) { return detail::stable_sigmoid(v); });
  bool rg = g.node(x.id()).requires_grad;
  int ix = x.id();
  DenseMatrix<Scalar> yc = y;
  auto pull = [ix, yc = std::move(yc)](GraphT<Scalar>& gr,
                                       const DenseMatrix<Scalar>& up) {
    gr.add_grad(ix, up.cwiseProduct(yc.cwiseProduct(
                        (DenseMatrix<Scalar>::Ones(yc.rows(), yc.cols()) - yc))));
  };
  return g.emplace(std::move(y), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "sigmoid");
}

template <typename Scalar>
VarT<Scalar> log(VarT<Scalar> x) {
  auto& g = *x.graph();
  if ((x.value().array() <= Scalar(0)).any()) {
    throw DomainError("log requires strictly positive inputs");
  }
  bool rg = g.node(x.id()).requires_grad;
  int ix = x.id();
  auto pull = [ix](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    gr.add_grad(ix, up.cwiseQuotient(gr.node(ix).value));
  };
  return g.emplace(x.value().array().log().matrix(), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "log");
}

// log(1 + e^x) in overflow-safe form; the gradient is sigmoid(x).
template <typename Scalar>
VarT<Scalar> softplus(VarT<Scalar> x) {
  auto& g = *x.graph();
  DenseMatrix<Scalar> y = x.value().unaryExpr([](Scalar v) {
    return std::max(v, Scalar(0)) + std::log1p(std::exp(-std::abs(v)));
  });
  bool rg = g.node(x.id()).requires_grad;
  int ix = x.id();
  auto pull = [ix](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    DenseMatrix<Scalar> s = gr.node(ix).value.unaryExpr(
        [](Scalar v) { return detail::stable_sigmoid(v); });
    gr.add_grad(ix, up.cwiseProduct(s));
  };
  return g.emplace(std::move(y), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "softplus");
}

template <typename Scalar>
VarT<Scalar> sum(VarT<Scalar> x) {
  auto& g = *x.graph();
  DenseMatrix<Scalar> out(1, 1);
  out(0, 0) = x.value().sum();
  bool rg = g.node(x.id()).requires_grad;
  int ix = x.id();
  auto pull = [ix](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    const auto& xv = gr.node(ix).value;
    gr.add_grad(ix, DenseMatrix<Scalar>::Constant(xv.rows(), xv.cols(), up(0, 0)));
  };
  return g.emplace(std::move(out), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "sum");
}

// GELU uses the tanh approximation 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715 x^3)));
// the derivative is closed-form, which keeps gradient checks tight.
template <typename Scalar>
VarT<Scalar> activation(VarT<Scalar> x, Activation kind) {
  auto& g = *x.graph();
  DenseMatrix<Scalar> y;
  if (kind == Activation::Relu) {
    y = x.value().cwiseMax(Scalar(0));
  } else {
    const Scalar c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
    y = x.value().unaryExpr([c](Scalar v) {
      Scalar u = c * (v + Scalar(0.044715) * v * v * v);
      return Scalar(0.5) * v * (Scalar(1) + std::tanh(u));
    });
  }
  bool rg = g.node(x.id()).requires_grad;
  int ix = x.id();
  auto pull = [ix, kind](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    const auto& xv = gr.node(ix).value;
    DenseMatrix<Scalar> d;
    if (kind == Activation::Relu) {
      d = xv.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); });
    } else {
      const Scalar c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
      d = xv.unaryExpr([c](Scalar v) {
        Scalar u = c * (v + Scalar(0.044715) * v * v * v);
        Scalar t = std::tanh(u);
        Scalar sech2 = Scalar(1) - t * t;
        Scalar du = c * (Scalar(1) + Scalar(3) * Scalar(0.044715) * v * v);
        return Scalar(0.5) * (Scalar(1) + t) + Scalar(0.5) * v * sech2 * du;
      });
    }
    gr.add_grad(ix, up.cwiseProduct(d));
  };
  return g.emplace(std::move(y), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "activation");
}

namespace detail {

// Stable masked softmax of one row: max-subtraction over kept entries, exact
// renormalization, zeros at masked entries. Fully masked rows become zero
// rows when permitted.
template <typename Scalar, typename RowIn, typename RowOut>
void softmax_row_into(const RowIn& in, const std::vector<bool>* keep, Index row,
                      RowOut&& out, bool allow_empty) {
  Index k = in.cols();
  auto kept = [&](Index j) {
    return keep == nullptr || (*keep)[static_cast<std::size_t>(j)];
  };
  Scalar mx = -std::numeric_limits<Scalar>::infinity();
  Index kept_count = 0;
  for (Index j = 0; j < k; ++j) {
    if (!kept(j)) continue;
    ++kept_count;
    mx = std::max(mx, in(row, j));
  }
  if (kept_count == 0) {
    if (!allow_empty) throw ContractError("softmax over a fully masked row");
    for (Index j = 0; j < k; ++j) out(row, j) = Scalar(0);
    return;
  }
  Scalar total = 0;
  for (Index j = 0; j < k; ++j) {
    Scalar e = kept(j) ? std::exp(in(row, j) - mx) : Scalar(0);
    out(row, j) = e;
    total += e;
  }
  for (Index j = 0; j < k; ++j) out(row, j) /= total;
}

// dx = y . (up - (sum of up.y per row)), rows independent; holds for masked
// rows too because masked entries of y are exactly zero.
template <typename Scalar>
typename GraphT<Scalar>::PullFn softmax_pull(int ix, DenseMatrix<Scalar> y) {
  return [ix, y = std::move(y)](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    DenseMatrix<Scalar> dx(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      Scalar dot = up.row(r).cwiseProduct(y.row(r)).sum();
      dx.row(r) = y.row(r).cwiseProduct(
          up.row(r) - DenseMatrix<Scalar>::Constant(1, y.cols(), dot));
    }
    gr.add_grad(ix, dx);
  };
}

}  // namespace detail

// Softmax over a single 1xk row with max-subtraction; entries positive and
// summing to one after renormalization.
template <typename Scalar>
VarT<Scalar> softmax_row(VarT<Scalar> x) {
  auto& g = *x.graph();
  if (x.rows() != 1 || x.cols() < 1) {
    throw DimensionError("softmax_row expects a nonempty 1xk row");
  }
  DenseMatrix<Scalar> y(1, x.cols());
  detail::softmax_row_into<Scalar>(x.value(), nullptr, 0, y, false);
  bool rg = g.node(x.id()).requires_grad;
  auto pull = detail::softmax_pull<Scalar>(x.id(), y);
  return g.emplace(std::move(y), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "softmax_row");
}

// Row-wise masked softmax: keep[r] lists the columns that participate in row
// r; masked columns get exactly zero weight (and zero gradient). Rows whose
// mask is empty yield zero rows when allow_empty_rows is set and raise a
// contract error otherwise.
template <typename Scalar>
VarT<Scalar> masked_softmax_rows(VarT<Scalar> x,
                                 const std::vector<std::vector<bool>>& keep,
                                 bool allow_empty_rows = false) {
  auto& g = *x.graph();
  if (static_cast<Index>(keep.size()) != x.rows()) {
    throw DimensionError("masked_softmax_rows: one mask per row required");
  }
  DenseMatrix<Scalar> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const auto& row_keep = keep[static_cast<std::size_t>(r)];
    if (static_cast<Index>(row_keep.size()) != x.cols()) {
      throw DimensionError("masked_softmax_rows: mask length != columns");
    }
    detail::softmax_row_into<Scalar>(x.value(), &row_keep, r, y, allow_empty_rows);
  }
  bool rg = g.node(x.id()).requires_grad;
  auto pull = detail::softmax_pull<Scalar>(x.id(), y);
  return g.emplace(std::move(y), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{},
                   "masked_softmax_rows");
}

// Horizontal concatenation of blocks with equal row counts;
// two 1x3 rows concatenate to one 1x6 row.
template <typename Scalar>
VarT<Scalar> concat_rows(const std::vector<VarT<Scalar>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of zero tensors");
  auto& g = *parts.front().graph();
  Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    detail::same_graph(parts.front(), p);
    if (p.rows() != rows) throw DimensionError("concat_rows: row counts differ");
    cols += p.cols();
  }
  DenseMatrix<Scalar> out(rows, cols);
  bool rg = false;
  std::vector<int> ids;
  std::vector<Index> widths;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    rg = rg || g.node(p.id()).requires_grad;
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  auto pull = [ids, widths](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    Index offset = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      gr.add_grad(ids[i], up.middleCols(offset, widths[i]));
      offset += widths[i];
    }
  };
  return g.emplace(std::move(out), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "concat_rows");
}

// Gathers rows of a table (embedding lookup); the gradient scatter-adds back.
template <typename Scalar>
VarT<Scalar> rows(VarT<Scalar> table, const std::vector<Index>& idx) {
  auto& g = *table.graph();
  DenseMatrix<Scalar> out(static_cast<Index>(idx.size()), table.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table.rows()) {
      throw IndexError("row index " + std::to_string(idx[i]) + " out of range [0," +
                       std::to_string(table.rows()) + ")");
    }
    out.row(static_cast<Index>(i)) = table.value().row(idx[i]);
  }
  bool rg = g.node(table.id()).requires_grad;
  int it = table.id();
  auto pull = [it, idx](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    const auto& tv = gr.node(it).value;
    DenseMatrix<Scalar> dt = DenseMatrix<Scalar>::Zero(tv.rows(), tv.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      dt.row(idx[i]) += up.row(static_cast<Index>(i));
    }
    gr.add_grad(it, dt);
  };
  return g.emplace(std::move(out), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "rows");
}

template <typename Scalar>
VarT<Scalar> row(VarT<Scalar> x, Index i) {
  return rows(x, std::vector<Index>{i});
}

// Zeroes the rows where keep[r] is false; gradients at those rows vanish.
template <typename Scalar>
VarT<Scalar> mask_rows(VarT<Scalar> x, const std::vector<bool>& keep) {
  auto& g = *x.graph();
  if (static_cast<Index>(keep.size()) != x.rows()) {
    throw DimensionError("mask_rows: mask length != rows");
  }
  DenseMatrix<Scalar> out = x.value();
  for (Index r = 0; r < out.rows(); ++r) {
    if (!keep[static_cast<std::size_t>(r)]) out.row(r).setZero();
  }
  bool rg = g.node(x.id()).requires_grad;
  int ix = x.id();
  auto pull = [ix, keep](GraphT<Scalar>& gr, const DenseMatrix<Scalar>& up) {
    DenseMatrix<Scalar> d = up;
    for (Index r = 0; r < d.rows(); ++r) {
      if (!keep[static_cast<std::size_t>(r)]) d.row(r).setZero();
    }
    gr.add_grad(ix, d);
  };
  return g.emplace(std::move(out), rg,
                   rg ? pull : typename GraphT<Scalar>::PullFn{}, "mask_rows");
}

// Project-wide default instantiations.
using Tensor = TensorT<Real>;
using Graph = GraphT<Real>;
using Var = VarT<Real>;
using Matrix = DenseMatrix<Real>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

}  // namespace starseq
