#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// A BasicTape records every differentiable operation in execution order. Leaf
// values enter either as parameters (gradient tracked) or as constants
// (detached). Calling backward() on a 1x1 result walks the record in exact
// reverse order; detached nodes never allocate a gradient.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcq/errors.hpp"
#include "dcq/tensor.hpp"

namespace dcq {

/// Handle to a value recorded on a tape.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const { return id != npos; }
};

template <typename Scalar>
class BasicTape {
 public:
  using Mat = Matrix<Scalar>;
  using BackwardFn = std::function<void(BasicTape&, const Mat& out_grad)>;

  Var parameter(Mat value) { return push(std::move(value), true, {}); }
  Var constant(Mat value) { return push(std::move(value), false, {}); }

  // Result of an operation. The backward rule is kept only if some input
  // requires a gradient.
  Var record(Mat value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (Var in : inputs) needs = needs || node(in).requires_grad;
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
  }

  const Mat& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  bool has_grad(Var v) const { return node(v).grad.size() > 0; }

  // Zeros when nothing flowed into v.
  Mat grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.size() > 0) return n.grad;
    return Mat::Zero(n.value.rows(), n.value.cols());
  }

  void accumulate(Var v, const Mat& g) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    require_same_shape(n.value, g, "gradient accumulation");
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  void backward(Var loss) {
    const Node& out = node(loss);
    if (out.value.rows() != 1 || out.value.cols() != 1) {
      throw ContractError("backward requires a scalar (1x1) output, got " + shape_string(out.value));
    }
    for (Node& n : nodes_) n.grad.resize(0, 0);
    visited_.clear();
    if (!out.requires_grad) return;
    nodes_[loss.id].grad = Mat::Constant(1, 1, Scalar(1));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      visited_.push_back(i);
      n.backward(*this, n.grad);
    }
  }

  /// Operation ids visited by the last backward(), in visiting order.
  const std::vector<std::size_t>& backward_order() const { return visited_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Mat value, bool requires_grad, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), Mat{}, requires_grad, std::move(fn)});
    return Var{nodes_.size() - 1};
  }

  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw IndexError("tape handle out of range");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw IndexError("tape handle out of range");
    return nodes_[v.id];
  }

  std::deque<Node> nodes_;  // stable addresses: value() references survive later records
  std::vector<std::size_t> visited_;
};

using Tape = BasicTape<double>;

template <typename Scalar>
struct LossDiagnostics {
  Scalar p_pos = 0;
  std::vector<Scalar> p_neg;
  Scalar loss = 0;
};

/// Mean softmax cross entropy plus the probabilities it was computed from.
template <typename Scalar>
struct CrossEntropy {
  Var loss;
  Matrix<Scalar> probs;
  std::vector<Index> targets;

  LossDiagnostics<Scalar> diagnostics(Index row) const {
    LossDiagnostics<Scalar> d;
    const Index t = targets.at(static_cast<std::size_t>(row));
    d.p_pos = probs(row, t);
    for (Index c = 0; c < probs.cols(); ++c) {
      if (c != t) d.p_neg.push_back(probs(row, c));
    }
    d.loss = -std::log(d.p_pos);
    return d;
  }
};

template <typename Scalar>
Var matmul(BasicTape<Scalar>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(av) + " x " + shape_string(bv));
  }
  Matrix<Scalar> out = av * bv;
  return tape.record(std::move(out), {a, b}, [a, b](BasicTape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

/// x + bias, with a 1xN bias broadcast over rows.
template <typename Scalar>
Var add_row(BasicTape<Scalar>& tape, Var x, Var bias) {
  const auto& xv = tape.value(x);
  const auto& bv = tape.value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ShapeError("add_row: bias " + shape_string(bv) + " does not broadcast over " + shape_string(xv));
  }
  Matrix<Scalar> out = xv.rowwise() + bv.row(0);
  return tape.record(std::move(out), {x, bias}, [x, bias](BasicTape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(x, g);
    if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
  });
}

/// PReLU with a learnable 1x1 slope.
template <typename Scalar>
Var prelu(BasicTape<Scalar>& tape, Var x, Var slope) {
  const auto& sv = tape.value(slope);
  if (sv.rows() != 1 || sv.cols() != 1) throw ShapeError("prelu: slope must be 1x1, got " + shape_string(sv));
  Matrix<Scalar> out = prelu(tape.value(x), sv(0, 0));
  return tape.record(std::move(out), {x, slope}, [x, slope](BasicTape<Scalar>& t, const Matrix<Scalar>& g) {
    const auto& xv = t.value(x);
    const Scalar a = t.value(slope)(0, 0);
    if (t.requires_grad(x)) {
      Matrix<Scalar> dx = (xv.array() >= Scalar(0)).select(g.array(), a * g.array()).matrix();
      t.accumulate(x, dx);
    }
    if (t.requires_grad(slope)) {
      Scalar ds = (xv.array() < Scalar(0)).select(xv.array() * g.array(), Scalar(0)).sum();
      t.accumulate(slope, Matrix<Scalar>::Constant(1, 1, ds));
    }
  });
}

template <typename Scalar>
Var l2_normalize_rows(BasicTape<Scalar>& tape, Var x, Scalar eps = Scalar(1e-12)) {
  Matrix<Scalar> out = l2_normalize_rows(tape.value(x), eps);
  return tape.record(std::move(out), {x}, [x, eps](BasicTape<Scalar>& t, const Matrix<Scalar>& g) {
    const auto& xv = t.value(x);
    Matrix<Scalar> dx(xv.rows(), xv.cols());
    for (Index r = 0; r < xv.rows(); ++r) {
      const Scalar norm = xv.row(r).norm();
      if (norm > eps) {
        const auto y = xv.row(r) / norm;
        dx.row(r) = (g.row(r) - y * g.row(r).dot(y)) / norm;
      } else {
        dx.row(r) = g.row(r) / eps;
      }
    }
    t.accumulate(x, dx);
  });
}

template <typename Scalar>
Var transpose(BasicTape<Scalar>& tape, Var x) {
  Matrix<Scalar> out = tape.value(x).transpose();
  return tape.record(std::move(out), {x}, [x](BasicTape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(x, g.transpose());
  });
}

/// Row i of the Bx1 result is <a_i, b_i>.
template <typename Scalar>
Var rowwise_dot(BasicTape<Scalar>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  require_same_shape(av, bv, "rowwise_dot");
  Matrix<Scalar> out = av.cwiseProduct(bv).rowwise().sum();
  return tape.record(std::move(out), {a, b}, [a, b](BasicTape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(a)) t.accumulate(a, t.value(b).array().colwise() * g.col(0).array());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).array().colwise() * g.col(0).array());
  });
}

template <typename Scalar>
Var concat_cols(BasicTape<Scalar>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  if (av.rows() != bv.rows()) {
    throw ShapeError("concat_cols: row counts differ, " + shape_string(av) + " vs " + shape_string(bv));
  }
  Matrix<Scalar> out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const Index split = av.cols();
  return tape.record(std::move(out), {a, b}, [a, b, split](BasicTape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.leftCols(split));
    if (t.requires_grad(b)) t.accumulate(b, g.rightCols(g.cols() - split));
  });
}

template <typename Scalar>
Var scale(BasicTape<Scalar>& tape, Var x, Scalar s) {
  Matrix<Scalar> out = tape.value(x) * s;
  return tape.record(std::move(out), {x}, [x, s](BasicTape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(x, g * s);
  });
}

/// Subtracts `amount` from column cols[i] of row i (the additive cosine margin).
template <typename Scalar>
Var subtract_at(BasicTape<Scalar>& tape, Var x, std::span<const Index> cols, Scalar amount) {
  Matrix<Scalar> out = tape.value(x);
  if (static_cast<Index>(cols.size()) != out.rows()) throw ShapeError("subtract_at: one column per row required");
  for (Index r = 0; r < out.rows(); ++r) {
    const Index c = cols[static_cast<std::size_t>(r)];
    if (c < 0 || c >= out.cols()) throw IndexError("subtract_at: column " + std::to_string(c) + " out of range");
    out(r, c) -= amount;
  }
  return tape.record(std::move(out), {x}, [x](BasicTape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(x, g); });
}

/// Overwrites entries where mask is true with `fill`; those entries pass no gradient.
template <typename Scalar>
Var masked_fill(BasicTape<Scalar>& tape, Var x, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& mask,
                Scalar fill) {
  const auto& xv = tape.value(x);
  require_same_shape(xv, mask, "masked_fill");
  Matrix<Scalar> out = mask.select(fill, xv.array()).matrix();
  return tape.record(std::move(out), {x}, [x, mask](BasicTape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> dx = mask.select(Scalar(0), g.array()).matrix();
    t.accumulate(x, dx);
  });
}

template <typename Scalar>
Var sum(BasicTape<Scalar>& tape, Var x) {
  Matrix<Scalar> out = Matrix<Scalar>::Constant(1, 1, tape.value(x).sum());
  return tape.record(std::move(out), {x}, [x](BasicTape<Scalar>& t, const Matrix<Scalar>& g) {
    const auto& xv = t.value(x);
    t.accumulate(x, Matrix<Scalar>::Constant(xv.rows(), xv.cols(), g(0, 0)));
  });
}

/// Row-wise softmax (max-subtracted) followed by the mean of -ln p[target].
template <typename Scalar>
CrossEntropy<Scalar> softmax_cross_entropy(BasicTape<Scalar>& tape, Var logits, std::span<const Index> targets) {
  const auto& z = tape.value(logits);
  if (static_cast<Index>(targets.size()) != z.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " + shape_string(z));
  }
  CrossEntropy<Scalar> ce;
  ce.targets.assign(targets.begin(), targets.end());
  ce.probs.resize(z.rows(), z.cols());
  Scalar total = 0;
  for (Index r = 0; r < z.rows(); ++r) {
    const Index t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= z.cols()) {
      throw IndexError("softmax_cross_entropy: target " + std::to_string(t) + " outside [0, " +
                       std::to_string(z.cols()) + ")");
    }
    const Scalar mx = z.row(r).maxCoeff();
    const auto e = (z.row(r).array() - mx).exp();
    const Scalar denom = e.sum();
    ce.probs.row(r) = e / denom;
    total += -(z(r, t) - mx - std::log(denom));
  }
  const Scalar rows = static_cast<Scalar>(z.rows());
  Matrix<Scalar> probs = ce.probs;
  std::vector<Index> tgt = ce.targets;
  ce.loss = tape.record(Matrix<Scalar>::Constant(1, 1, total / rows), {logits},
                        [logits, probs = std::move(probs), tgt = std::move(tgt), rows](BasicTape<Scalar>& t,
                                                                                    const Matrix<Scalar>& g) {
                          Matrix<Scalar> dz = probs;
                          for (Index r = 0; r < dz.rows(); ++r) dz(r, tgt[static_cast<std::size_t>(r)]) -= Scalar(1);
                          t.accumulate(logits, dz * (g(0, 0) / rows));
                        });
  return ce;
}

}  // namespace dcq
