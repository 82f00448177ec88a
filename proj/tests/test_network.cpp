#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dexgrasp/adam.hpp"
#include "dexgrasp/checkpoint.hpp"
#include "dexgrasp/network.hpp"
#include "dexgrasp/rng.hpp"

using namespace dexgrasp;

namespace {

NetworkConfig small_config(int in, int width, int blocks, std::uint64_t seed) {
  NetworkConfig cfg;
  cfg.input_dim = in;
  cfg.width = width;
  cfg.blocks = blocks;
  cfg.heads = {{"out", 2, Activation::identity},
               {"prob", 1, Activation::sigmoid}};
  cfg.init_seed = seed;
  return cfg;
}

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// Hand-rolled forward: explicit loops, no Eigen products.
Mat naive_dense(const Mat& x, const Mat& w, const Mat& b) {
  Mat out = Mat::Zero(x.rows(), w.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) acc += x(i, j) * w(j, k);
      out(i, k) = acc + b(0, k);
    }
  return out;
}

Mat naive_leaky(const Mat& m, double slope) {
  Mat out = m;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) = out(i) > 0 ? out(i) : slope * out(i);
  return out;
}

}  // namespace

TEST_CASE("zero-weight network emits the head activation of zero") {
  NetworkConfig cfg = small_config(4, 8, 1, 3);
  Network net(cfg);
  for (auto& p : net.mutable_param_values()) p.setZero();
  const auto out = net.forward_values(Mat::Random(5, 4));
  CHECK(out.at("out").cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 0; i < 5; ++i)
    CHECK(out.at("prob")(i, 0) == doctest::Approx(0.5));
}

TEST_CASE("residual block with zeroed dense layers passes input through") {
  NetworkConfig cfg;
  cfg.input_dim = 6;
  cfg.width = 6;
  cfg.blocks = 1;
  cfg.hidden_act = Activation::identity;
  cfg.heads = {{"out", 6, Activation::identity}};
  cfg.init_seed = 5;
  Network net(cfg);
  net.param("in_proj.W") = Mat::Identity(6, 6);
  net.param("in_proj.b").setZero();
  net.param("block0.fc1.W").setZero();
  net.param("block0.fc1.b").setZero();
  net.param("block0.fc2.W").setZero();
  net.param("block0.fc2.b").setZero();
  net.param("head.out.W") = Mat::Identity(6, 6);
  net.param("head.out.b").setZero();
  Rng rng(2);
  const Mat v = random_mat(3, 6, rng);
  const auto out = net.forward_values(v);
  CHECK((out.at("out") - v).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("forward matches a hand-rolled oracle") {
  Rng rng(17);
  NetworkConfig cfg = small_config(5, 7, 2, 11);
  Network net(cfg);
  const Mat x = random_mat(4, 5, rng);

  Mat h = naive_leaky(naive_dense(x, net.param("in_proj.W"), net.param("in_proj.b")), 0.2);
  for (int b = 0; b < 2; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    Mat inner = naive_leaky(
        naive_dense(h, net.param(p + "fc1.W"), net.param(p + "fc1.b")), 0.2);
    inner = naive_dense(inner, net.param(p + "fc2.W"), net.param(p + "fc2.b"));
    h = h + inner;
  }
  const Mat expected = naive_dense(h, net.param("head.out.W"), net.param("head.out.b"));

  const auto out = net.forward_values(x);
  CHECK((out.at("out") - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward rejects mismatched input width naming the layer") {
  Network net(small_config(4, 8, 1, 3));
  try {
    net.forward_values(Mat::Zero(2, 5));
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("in_proj") != std::string::npos);
  }
}

TEST_CASE("forward determinism across repeated calls") {
  Network net(small_config(6, 16, 2, 21));
  Rng rng(4);
  const Mat x = random_mat(8, 6, rng);
  const Mat a = net.forward_values(x).at("out");
  const Mat b = net.forward_values(x).at("out");
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged, moments decay") {
  std::vector<Mat> params = {Mat::Constant(2, 2, 1.5)};
  std::vector<Mat> grads = {Mat::Zero(2, 2)};
  AdamState st = AdamState::zeros_like(params);
  st.m[0].setConstant(0.3);
  st.v[0].setConstant(0.2);
  AdamConfig cfg;
  adam_step(params, grads, st, cfg);
  CHECK(st.m[0](0, 0) == doctest::Approx(0.3 * 0.9));
  CHECK(st.v[0](0, 0) == doctest::Approx(0.2 * 0.999));
}

TEST_CASE("adam: truly zero state and gradient is a no-op") {
  std::vector<Mat> params = {Mat::Constant(2, 2, 1.5)};
  std::vector<Mat> grads = {Mat::Zero(2, 2)};
  AdamState st = AdamState::zeros_like(params);
  AdamConfig cfg;
  adam_step(params, grads, st, cfg);
  CHECK((params[0].array() - 1.5).abs().maxCoeff() == 0.0);
}

TEST_CASE("adam: constant gradient matches the scalar closed-form oracle") {
  std::vector<Mat> params = {Mat::Constant(1, 1, 0.0)};
  AdamState st = AdamState::zeros_like(params);
  AdamConfig cfg;
  cfg.lr = 1e-3;
  const double g = -0.37;

  // Independent closed-form scalar recursion.
  double m = 0.0, v = 0.0, x = 0.0;
  for (int t = 1; t <= 50; ++t) {
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double m_hat = m / (1.0 - std::pow(0.9, t));
    const double v_hat = v / (1.0 - std::pow(0.999, t));
    x -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);

    std::vector<Mat> grads = {Mat::Constant(1, 1, g)};
    adam_step(params, grads, st, cfg);
    CHECK(params[0](0, 0) == doctest::Approx(x).epsilon(1e-12));
  }
  // With a constant gradient the per-step move approaches lr * sign(-g).
  const double before = params[0](0, 0);
  std::vector<Mat> grads = {Mat::Constant(1, 1, g)};
  adam_step(params, grads, st, cfg);
  CHECK(params[0](0, 0) - before == doctest::Approx(cfg.lr).epsilon(1e-3));
}

TEST_CASE("checkpoint round trip preserves outputs bit for bit") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dexgrasp_ckpt_test";
  fs::create_directories(dir);

  Network net(small_config(5, 12, 2, 77));
  CheckpointMeta meta;
  meta.provenance = "test;data=none";
  meta.epoch = 9;
  meta.rng_state = {1, 2, 3, 4};
  AdamState opt = AdamState::zeros_like(net.param_values());
  opt.t = 17;
  opt.m[0].setConstant(0.25);

  const fs::path p1 = dir / "a.ckpt";
  save_checkpoint(p1, net, meta, &opt);
  const LoadedCheckpoint loaded = load_checkpoint(p1);
  CHECK(loaded.meta.provenance == meta.provenance);
  CHECK(loaded.meta.epoch == 9);
  CHECK(loaded.meta.rng_state[2] == 3);
  CHECK(loaded.has_opt);
  CHECK(loaded.opt.t == 17);
  CHECK(loaded.opt.m[0](0, 0) == 0.25);

  Rng rng(6);
  const Mat x = random_mat(3, 5, rng);
  const Mat y1 = net.forward_values(x).at("out");
  const Mat y2 = loaded.net.forward_values(x).at("out");
  CHECK((y1 - y2).cwiseAbs().maxCoeff() == 0.0);

  // save -> load -> save is byte-identical.
  const fs::path p2 = dir / "b.ckpt";
  save_checkpoint(p2, loaded.net, loaded.meta, &loaded.opt);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string bytes1((std::istreambuf_iterator<char>(f1)), {});
  const std::string bytes2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(bytes1 == bytes2);
  CHECK(!bytes1.empty());
}

TEST_CASE("checkpoint refuses truncation and arch mismatch") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dexgrasp_ckpt_test";
  fs::create_directories(dir);
  Network net(small_config(5, 12, 2, 78));
  const fs::path p = dir / "full.ckpt";
  save_checkpoint(p, net, {});

  // Truncate.
  std::ifstream in(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();
  const fs::path pt = dir / "truncated.ckpt";
  std::ofstream out(pt, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(pt), Error);

  // Hash mismatch refusal.
  const Network other(small_config(6, 12, 2, 78));
  CHECK_THROWS_AS(load_checkpoint(p, other.config().arch_hash()), Error);
  CHECK_NOTHROW(load_checkpoint(p, net.config().arch_hash()));
}

TEST_CASE("arch string round trips through the parser") {
  NetworkConfig cfg = small_config(9, 24, 3, 5);
  cfg.hidden_act = Activation::tanh;
  const NetworkConfig back = parse_arch_string(cfg.arch_string());
  CHECK(back.arch_string() == cfg.arch_string());
  CHECK(back.arch_hash() == cfg.arch_hash());
}
