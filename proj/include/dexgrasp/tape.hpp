#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "dexgrasp/errors.hpp"

namespace dexgrasp {

using Mat = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid until Tape::reset().
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;
};

/// Define-by-run reverse-mode automatic differentiation over dense
/// double-precision matrices.
///
/// Values are computed eagerly as nodes are appended. The reverse pass
/// (gradients()) builds its vector-Jacobian products out of ordinary tape
/// ops, so gradients are themselves differentiable nodes; taking gradients
/// of expressions built from earlier gradients (as the gradient-penalty
/// term requires) therefore needs no special casing.
class Tape {
 public:
  enum class Op {
    leaf,
    matmul,
    transpose,
    add,
    sub,
    mul,
    div,
    scale,
    add_scalar,
    neg,
    bias_add,        // x (N x M) + row (1 x M)
    broadcast_col,   // N x 1 -> N x M
    broadcast_row,   // 1 x M -> N x M
    broadcast_full,  // 1 x 1 -> N x M
    sum,             // -> 1 x 1
    mean,            // -> 1 x 1
    sum_cols,        // N x M -> N x 1
    sum_rows,        // N x M -> 1 x M
    log,
    exp,
    tanh,
    sigmoid,
    softplus,
    leaky_relu,
    leaky_relu_grad,  // elementwise derivative of leaky_relu at the input
    inside_mask,      // 1 where lo < x < hi else 0
    square,
    sqrt,
    clamp,
    concat_cols,
    slice_cols,
    pad_cols,  // place an N x m block into an N x total zero matrix
  };

  struct Node {
    Node() = default;
    Node(Op o, Mat v, int a = -1, int b = -1)
        : op(o), value(std::move(v)), in0(a), in1(b) {}

    Op op = Op::leaf;
    Mat value;
    int in0 = -1, in1 = -1;      // common binary inputs
    std::vector<int> in_multi;   // concat_cols only
    double p0 = 0.0, p1 = 0.0;   // op parameters (slope, bounds, scale...)
    int i0 = 0, i1 = 0;          // integer parameters (slice offsets...)
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// When set, every created node is checked for NaN/Inf entries.
  bool check_finite = true;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  void reset() { nodes_.clear(); }

  Var leaf(Mat value);
  Var scalar_leaf(double v);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var neg(Var a);
  Var bias_add(Var x, Var row);
  Var broadcast_col(Var v, int cols);
  Var broadcast_row(Var v, int rows);
  Var broadcast_full(Var s, int rows, int cols);
  Var sum(Var a);
  Var mean(Var a);
  Var sum_cols(Var a);
  Var sum_rows(Var a);
  Var log(Var a);
  Var exp(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var leaky_relu(Var a, double slope);
  Var leaky_relu_grad(Var a, double slope);
  Var inside_mask(Var a, double lo, double hi);
  Var square(Var a);
  Var sqrt(Var a);
  Var clamp(Var a, double lo, double hi);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, int start, int n);
  Var pad_cols(Var a, int start, int total);

  /// Reverse pass from scalar `loss`. Returns one gradient Var per entry of
  /// `wrt`, in order; a Var not reached by the backward sweep gets a zero
  /// gradient of matching shape. The returned Vars live on this tape and may
  /// be used to build further differentiable expressions.
  std::vector<Var> gradients(Var loss, const std::vector<Var>& wrt);

 private:
  Var push(Node n);
  void check_same_tape(Var v) const;

  std::vector<Node> nodes_;
};

inline const Mat& Var::value() const { return tape->node(id).value; }

inline double Var::scalar() const {
  const Mat& m = value();
  require(m.rows() == 1 && m.cols() == 1, Errc::shape_mismatch,
          "scalar() on non 1x1 node");
  return m(0, 0);
}

}  // namespace dexgrasp
