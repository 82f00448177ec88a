#include <doctest.h>

#include <cmath>
#include <functional>

#include "dexgrasp/rng.hpp"
#include "dexgrasp/tape.hpp"

using namespace dexgrasp;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// A contrived expression touching most of the op set.
Var everything_expr(Tape& t, Var x, Var w, Var b) {
  Var h = t.bias_add(t.matmul(x, w), b);
  h = t.leaky_relu(h, 0.2);
  Var s = t.sigmoid(t.slice_cols(h, 0, 1));
  Var u = t.tanh(t.slice_cols(h, 1, 1));
  Var joined = t.concat_cols({s, u});
  Var q = t.sqrt(t.add_scalar(t.square(joined), 0.3));
  Var lg = t.log(t.add_scalar(t.clamp(q, 0.05, 2.5), 1.0));
  Var norms = t.sqrt(t.add_scalar(t.sum_cols(t.square(lg)), 1e-9));
  Var spread = t.sub(t.broadcast_col(norms, 2), lg);
  Var rows = t.sum_rows(t.mul(spread, spread));
  return t.add(t.mean(t.div(rows, t.add_scalar(rows, 3.0))),
               t.scale(t.sum(h), 0.01));
}

double everything_value(const std::vector<Mat>& in) {
  Tape t;
  return everything_expr(t, t.leaf(in[0]), t.leaf(in[1]), t.leaf(in[2])).scalar();
}

/// Central finite differences of f over every entry of the inputs.
double max_rel_error_fd(
    const std::function<double(const std::vector<Mat>&)>& f,
    std::vector<Mat> inputs, const std::vector<Mat>& analytic, double h = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < inputs[k].cols(); ++j) {
        const double orig = inputs[k](i, j);
        inputs[k](i, j) = orig + h;
        const double up = f(inputs);
        inputs[k](i, j) = orig - h;
        const double dn = f(inputs);
        inputs[k](i, j) = orig;
        const double fd = (up - dn) / (2.0 * h);
        const double an = analytic[k](i, j);
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("linear layer gradient equals outer-product closed form") {
  // loss = sum(x W); dW = x^T 1, dx = 1 W^T
  Rng rng(2);
  const Mat x = random_mat(4, 3, rng);
  const Mat w = random_mat(3, 5, rng);
  Tape t;
  const Var xv = t.leaf(x);
  const Var wv = t.leaf(w);
  const Var loss = t.sum(t.matmul(xv, wv));
  const auto grads = t.gradients(loss, {wv, xv});
  const Mat expected_w = x.transpose() * Mat::Ones(4, 5);
  const Mat expected_x = Mat::Ones(4, 5) * w.transpose();
  CHECK((grads[0].value() - expected_w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((grads[1].value() - expected_x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("detached branch gets zero gradient") {
  Tape t;
  const Var a = t.scalar_leaf(2.0);
  const Var b = t.scalar_leaf(3.0);
  const Var loss = t.mul(a, a);
  const auto g = t.gradients(loss, {b});
  CHECK(g[0].value()(0, 0) == 0.0);
}

TEST_CASE("non-scalar loss is rejected") {
  Tape t;
  const Var a = t.leaf(Mat::Ones(2, 2));
  CHECK_THROWS_AS(t.gradients(a, {a}), Error);
}

TEST_CASE("finite differences across the op set") {
  Rng rng(13);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<Mat> inputs = {random_mat(3, 4, rng), random_mat(4, 2, rng),
                               random_mat(1, 2, rng)};
    Tape t;
    const Var xv = t.leaf(inputs[0]);
    const Var wv = t.leaf(inputs[1]);
    const Var bv = t.leaf(inputs[2]);
    const Var total = everything_expr(t, xv, wv, bv);
    const auto grads = t.gradients(total, {xv, wv, bv});
    const std::vector<Mat> analytic = {grads[0].value(), grads[1].value(),
                                       grads[2].value()};
    CHECK(max_rel_error_fd(everything_value, inputs, analytic) < 1e-5);
  }
}

TEST_CASE("second-order gradients: grad-norm penalty differentiates") {
  // penalty(W) = (|d sum(tanh(x W)) / dx| - 1)^2; FD over W entries must
  // match the analytic gradient produced by backward-through-backward.
  Rng rng(29);
  const Mat x0 = random_mat(2, 3, rng);

  auto penalty_value = [&x0](const Mat& w) -> double {
    Tape t;
    const Var x = t.leaf(x0);
    const Var wv = t.leaf(w);
    const Var y = t.sum(t.tanh(t.matmul(x, wv)));
    const Var gx = t.gradients(y, {x})[0];
    const Var n = t.sqrt(t.add_scalar(t.sum(t.square(gx)), 1e-12));
    return t.square(t.add_scalar(n, -1.0)).scalar();
  };

  const Mat w = random_mat(3, 2, rng);
  Tape t;
  const Var x = t.leaf(x0);
  const Var wv = t.leaf(w);
  const Var y = t.sum(t.tanh(t.matmul(x, wv)));
  const Var gx = t.gradients(y, {x})[0];
  const Var n = t.sqrt(t.add_scalar(t.sum(t.square(gx)), 1e-12));
  const Var pen = t.square(t.add_scalar(n, -1.0));
  const Mat analytic = t.gradients(pen, {wv})[0].value();

  double worst = 0.0;
  const double h = 1e-6;
  Mat wp = w;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      wp(i, j) = w(i, j) + h;
      const double up = penalty_value(wp);
      wp(i, j) = w(i, j) - h;
      const double dn = penalty_value(wp);
      wp(i, j) = w(i, j);
      const double fd = (up - dn) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(analytic(i, j)), 1e-8});
      worst = std::max(worst, std::abs(fd - analytic(i, j)) / denom);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("finiteness guard trips on NaN") {
  Tape t;
  const Var a = t.scalar_leaf(-1.0);
  CHECK_THROWS_AS(t.log(a), Error);
}
