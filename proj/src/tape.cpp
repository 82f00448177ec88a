#include "dexgrasp/tape.hpp"

#include <cmath>

namespace dexgrasp {

namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), Errc::shape_mismatch,
          std::string(what) + ": " + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
              "x" + std::to_string(b.cols()));
}

}  // namespace

Var Tape::push(Node n) {
  if (check_finite) {
    require(n.value.allFinite(), Errc::nan_loss,
            "non-finite value produced by tape op");
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_same_tape(Var v) const {
  require(v.tape == this && v.id >= 0 &&
              v.id < static_cast<int>(nodes_.size()),
          Errc::shape_mismatch, "Var does not belong to this tape");
}

Var Tape::leaf(Mat value) {
  Node n{Op::leaf, std::move(value)};
  return push(std::move(n));
}

Var Tape::scalar_leaf(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return leaf(std::move(m));
}

Var Tape::matmul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  require(a.cols() == b.rows(), Errc::shape_mismatch,
          "matmul inner dimensions disagree");
  Node n{Op::matmul, a.value() * b.value(), a.id, b.id};
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  check_same_tape(a);
  Node n{Op::transpose, a.value().transpose(), a.id};
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  require_same_shape(a.value(), b.value(), "add");
  Node n{Op::add, a.value() + b.value(), a.id, b.id};
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  require_same_shape(a.value(), b.value(), "sub");
  Node n{Op::sub, a.value() - b.value(), a.id, b.id};
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  require_same_shape(a.value(), b.value(), "mul");
  Node n{Op::mul, a.value().cwiseProduct(b.value()), a.id, b.id};
  return push(std::move(n));
}

Var Tape::div(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  require_same_shape(a.value(), b.value(), "div");
  Node n{Op::div, a.value().cwiseQuotient(b.value()), a.id, b.id};
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  check_same_tape(a);
  Node n{Op::scale, a.value() * s, a.id};
  n.p0 = s;
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double s) {
  check_same_tape(a);
  Node n{Op::add_scalar, (a.value().array() + s).matrix(), a.id};
  n.p0 = s;
  return push(std::move(n));
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::bias_add(Var x, Var row) {
  check_same_tape(x);
  check_same_tape(row);
  require(row.rows() == 1 && row.cols() == x.cols(), Errc::shape_mismatch,
          "bias_add expects a 1 x cols(x) row vector");
  Mat out = x.value();
  out.rowwise() += row.value().row(0);
  Node n{Op::bias_add, std::move(out), x.id, row.id};
  return push(std::move(n));
}

Var Tape::broadcast_col(Var v, int cols) {
  check_same_tape(v);
  require(v.cols() == 1, Errc::shape_mismatch, "broadcast_col expects N x 1");
  Node n{Op::broadcast_col, v.value().replicate(1, cols), v.id};
  n.i0 = cols;
  return push(std::move(n));
}

Var Tape::broadcast_row(Var v, int rows) {
  check_same_tape(v);
  require(v.rows() == 1, Errc::shape_mismatch, "broadcast_row expects 1 x M");
  Node n{Op::broadcast_row, v.value().replicate(rows, 1), v.id};
  n.i0 = rows;
  return push(std::move(n));
}

Var Tape::broadcast_full(Var s, int rows, int cols) {
  check_same_tape(s);
  require(s.rows() == 1 && s.cols() == 1, Errc::shape_mismatch,
          "broadcast_full expects 1 x 1");
  Node n{Op::broadcast_full, Mat::Constant(rows, cols, s.value()(0, 0)), s.id};
  n.i0 = rows;
  n.i1 = cols;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  check_same_tape(a);
  Mat m(1, 1);
  m(0, 0) = a.value().sum();
  Node n{Op::sum, std::move(m), a.id};
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  check_same_tape(a);
  require(a.value().size() > 0, Errc::empty_batch, "mean of empty matrix");
  Mat m(1, 1);
  m(0, 0) = a.value().mean();
  Node n{Op::mean, std::move(m), a.id};
  return push(std::move(n));
}

Var Tape::sum_cols(Var a) {
  check_same_tape(a);
  Node n{Op::sum_cols, a.value().rowwise().sum(), a.id};
  return push(std::move(n));
}

Var Tape::sum_rows(Var a) {
  check_same_tape(a);
  Node n{Op::sum_rows, a.value().colwise().sum(), a.id};
  return push(std::move(n));
}

Var Tape::log(Var a) {
  check_same_tape(a);
  Node n{Op::log, a.value().array().log().matrix(), a.id};
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  check_same_tape(a);
  Node n{Op::exp, a.value().array().exp().matrix(), a.id};
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  check_same_tape(a);
  Node n{Op::tanh, a.value().array().tanh().matrix(), a.id};
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  check_same_tape(a);
  Node n{Op::sigmoid, (1.0 / (1.0 + (-a.value().array()).exp())).matrix(), a.id};
  return push(std::move(n));
}

Var Tape::softplus(Var a) {
  check_same_tape(a);
  // log(1 + exp(x)), computed stably.
  Node n{Op::softplus,
         a.value().unaryExpr([](double x) {
           return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
         }),
         a.id};
  return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double slope) {
  check_same_tape(a);
  Node n{Op::leaky_relu,
         a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; }),
         a.id};
  n.p0 = slope;
  return push(std::move(n));
}

Var Tape::leaky_relu_grad(Var a, double slope) {
  check_same_tape(a);
  Node n{Op::leaky_relu_grad,
         a.value().unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; }),
         a.id};
  n.p0 = slope;
  return push(std::move(n));
}

Var Tape::inside_mask(Var a, double lo, double hi) {
  check_same_tape(a);
  Node n{Op::inside_mask,
         a.value().unaryExpr(
             [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; }),
         a.id};
  n.p0 = lo;
  n.p1 = hi;
  return push(std::move(n));
}

Var Tape::square(Var a) {
  check_same_tape(a);
  Node n{Op::square, a.value().array().square().matrix(), a.id};
  return push(std::move(n));
}

Var Tape::sqrt(Var a) {
  check_same_tape(a);
  Node n{Op::sqrt, a.value().array().sqrt().matrix(), a.id};
  return push(std::move(n));
}

Var Tape::clamp(Var a, double lo, double hi) {
  check_same_tape(a);
  Node n{Op::clamp, a.value().array().max(lo).min(hi).matrix(), a.id};
  n.p0 = lo;
  n.p1 = hi;
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), Errc::empty_batch, "concat_cols of nothing");
  Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    check_same_tape(p);
    require(p.rows() == rows, Errc::shape_mismatch,
            "concat_cols row mismatch");
    cols += p.cols();
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  Node n{Op::concat_cols, Mat()};
  for (Var p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    n.in_multi.push_back(p.id);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, int start, int n_cols) {
  check_same_tape(a);
  require(start >= 0 && n_cols >= 1 && start + n_cols <= a.cols(),
          Errc::shape_mismatch, "slice_cols out of range");
  Node n{Op::slice_cols, a.value().middleCols(start, n_cols), a.id};
  n.i0 = start;
  n.i1 = n_cols;
  return push(std::move(n));
}

Var Tape::pad_cols(Var a, int start, int total) {
  check_same_tape(a);
  require(start >= 0 && start + a.cols() <= total, Errc::shape_mismatch,
          "pad_cols out of range");
  Mat out = Mat::Zero(a.rows(), total);
  out.middleCols(start, a.cols()) = a.value();
  Node n{Op::pad_cols, std::move(out), a.id};
  n.i0 = start;
  n.i1 = total;
  return push(std::move(n));
}

std::vector<Var> Tape::gradients(Var loss, const std::vector<Var>& wrt) {
  check_same_tape(loss);
  require(loss.rows() == 1 && loss.cols() == 1, Errc::shape_mismatch,
          "gradients() requires a scalar (1x1) loss");
  for (Var w : wrt) check_same_tape(w);

  const int frontier = loss.id;
  // grad ids for nodes [0, frontier]; -1 = no gradient reached yet.
  std::vector<int> grad(static_cast<std::size_t>(frontier) + 1, -1);
  grad[static_cast<std::size_t>(loss.id)] = leaf(Mat::Ones(1, 1)).id;

  auto accumulate = [&](int target, Var contribution) {
    if (target > frontier) return;  // nodes created during this sweep
    int& g = grad[static_cast<std::size_t>(target)];
    if (g < 0) {
      g = contribution.id;
    } else {
      g = add(Var{this, g}, contribution).id;
    }
  };

  for (int id = frontier; id >= 0; --id) {
    const int gid = grad[static_cast<std::size_t>(id)];
    if (gid < 0) continue;
    // Copy the fields the vjp needs (not the value): pushing nodes may
    // reallocate nodes_.
    Node nd;
    {
      const Node& ref = nodes_[static_cast<std::size_t>(id)];
      nd.op = ref.op;
      nd.in0 = ref.in0;
      nd.in1 = ref.in1;
      nd.in_multi = ref.in_multi;
      nd.p0 = ref.p0;
      nd.p1 = ref.p1;
      nd.i0 = ref.i0;
      nd.i1 = ref.i1;
    }
    const Var g{this, gid};
    const Var self{this, id};
    switch (nd.op) {
      case Op::leaf:
        break;
      case Op::matmul: {
        const Var a{this, nd.in0}, b{this, nd.in1};
        accumulate(nd.in0, matmul(g, transpose(b)));
        accumulate(nd.in1, matmul(transpose(a), g));
        break;
      }
      case Op::transpose:
        accumulate(nd.in0, transpose(g));
        break;
      case Op::add:
        accumulate(nd.in0, g);
        accumulate(nd.in1, g);
        break;
      case Op::sub:
        accumulate(nd.in0, g);
        accumulate(nd.in1, neg(g));
        break;
      case Op::mul: {
        const Var a{this, nd.in0}, b{this, nd.in1};
        accumulate(nd.in0, mul(g, b));
        accumulate(nd.in1, mul(g, a));
        break;
      }
      case Op::div: {
        const Var a{this, nd.in0}, b{this, nd.in1};
        accumulate(nd.in0, div(g, b));
        accumulate(nd.in1, neg(mul(g, div(a, square(b)))));
        break;
      }
      case Op::scale:
        accumulate(nd.in0, scale(g, nd.p0));
        break;
      case Op::add_scalar:
        accumulate(nd.in0, g);
        break;
      case Op::bias_add:
        accumulate(nd.in0, g);
        accumulate(nd.in1, sum_rows(g));
        break;
      case Op::broadcast_col:
        accumulate(nd.in0, sum_cols(g));
        break;
      case Op::broadcast_row:
        accumulate(nd.in0, sum_rows(g));
        break;
      case Op::broadcast_full:
        accumulate(nd.in0, sum(g));
        break;
      case Op::sum: {
        const Node& src = nodes_[static_cast<std::size_t>(nd.in0)];
        accumulate(nd.in0, broadcast_full(g, static_cast<int>(src.value.rows()),
                                          static_cast<int>(src.value.cols())));
        break;
      }
      case Op::mean: {
        const Node& src = nodes_[static_cast<std::size_t>(nd.in0)];
        const double inv = 1.0 / static_cast<double>(src.value.size());
        accumulate(nd.in0,
                   scale(broadcast_full(g, static_cast<int>(src.value.rows()),
                                        static_cast<int>(src.value.cols())),
                         inv));
        break;
      }
      case Op::sum_cols: {
        const Node& src = nodes_[static_cast<std::size_t>(nd.in0)];
        accumulate(nd.in0, broadcast_col(g, static_cast<int>(src.value.cols())));
        break;
      }
      case Op::sum_rows: {
        const Node& src = nodes_[static_cast<std::size_t>(nd.in0)];
        accumulate(nd.in0, broadcast_row(g, static_cast<int>(src.value.rows())));
        break;
      }
      case Op::log: {
        const Var a{this, nd.in0};
        accumulate(nd.in0, div(g, a));
        break;
      }
      case Op::exp:
        accumulate(nd.in0, mul(g, self));
        break;
      case Op::tanh:
        // d tanh = 1 - tanh^2
        accumulate(nd.in0, mul(g, add_scalar(neg(square(self)), 1.0)));
        break;
      case Op::sigmoid:
        // d sigmoid = s (1 - s)
        accumulate(nd.in0, mul(g, mul(self, add_scalar(neg(self), 1.0))));
        break;
      case Op::softplus:
        accumulate(nd.in0, mul(g, sigmoid(Var{this, nd.in0})));
        break;
      case Op::leaky_relu:
        accumulate(nd.in0, mul(g, leaky_relu_grad(Var{this, nd.in0}, nd.p0)));
        break;
      case Op::leaky_relu_grad:
      case Op::inside_mask:
        break;  // piecewise constant; zero gradient almost everywhere
      case Op::square:
        accumulate(nd.in0, scale(mul(g, Var{this, nd.in0}), 2.0));
        break;
      case Op::sqrt:
        accumulate(nd.in0, scale(div(g, self), 0.5));
        break;
      case Op::clamp:
        accumulate(nd.in0,
                   mul(g, inside_mask(Var{this, nd.in0}, nd.p0, nd.p1)));
        break;
      case Op::concat_cols: {
        int at = 0;
        for (int part : nd.in_multi) {
          const int w =
              static_cast<int>(nodes_[static_cast<std::size_t>(part)].value.cols());
          accumulate(part, slice_cols(g, at, w));
          at += w;
        }
        break;
      }
      case Op::slice_cols: {
        const Node& src = nodes_[static_cast<std::size_t>(nd.in0)];
        accumulate(nd.in0,
                   pad_cols(g, nd.i0, static_cast<int>(src.value.cols())));
        break;
      }
      case Op::pad_cols: {
        const Node& src = nodes_[static_cast<std::size_t>(nd.in0)];
        accumulate(nd.in0,
                   slice_cols(g, nd.i0, static_cast<int>(src.value.cols())));
        break;
      }
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    const int gid = w.id <= frontier ? grad[static_cast<std::size_t>(w.id)] : -1;
    if (gid >= 0) {
      out.push_back(Var{this, gid});
    } else {
      out.push_back(leaf(Mat::Zero(w.rows(), w.cols())));
    }
  }
  return out;
}

}  // namespace dexgrasp
