#include <doctest.h>

#include <cmath>

#include "dexgrasp/evaluator.hpp"
#include "dexgrasp/rng.hpp"

using namespace dexgrasp;

namespace {

double bce_value(const std::vector<double>& probs, const std::vector<double>& labels) {
  Tape t;
  Mat p(static_cast<Eigen::Index>(probs.size()), 1);
  Mat y(static_cast<Eigen::Index>(labels.size()), 1);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    p(static_cast<Eigen::Index>(i), 0) = probs[i];
    y(static_cast<Eigen::Index>(i), 0) = labels[i];
  }
  return evaluator_loss(t, t.leaf(p), y).scalar();
}

std::vector<LoadedScene> separable_scenes(int n_scenes, int bps_dim,
                                          std::uint64_t seed) {
  // Positives near one pose per scene, negatives displaced: separable by a
  // small network so the training smoke can reach a high AUC.
  std::vector<LoadedScene> scenes;
  Rng rng(seed);
  for (int s = 0; s < n_scenes; ++s) {
    LoadedScene scene;
    scene.name = "sep_" + std::to_string(s);
    scene.bps.resize(static_cast<std::size_t>(bps_dim));
    for (auto& d : scene.bps) d = rng.uniform(0.0, 1.0);
    const Vec3 center(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                      rng.uniform(0.02, 0.08));
    for (int i = 0; i < 24; ++i) {
      LabeledGrasp pos;
      pos.positive = true;
      pos.grasp.rotation = rot_z(rng.uniform(0, 2 * M_PI));
      pos.grasp.translation = center + Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.004;
      pos.grasp.joints.setConstant(0.5);
      scene.grasps.push_back(pos);

      LabeledGrasp neg = pos;
      neg.positive = false;
      neg.grasp.translation += Vec3(rng.normal(), rng.normal(), rng.normal()).normalized() * 0.08;
      neg.grasp.joints.setConstant(1.3);
      scene.grasps.push_back(neg);
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace

TEST_CASE("evaluator loss closed forms") {
  CHECK(bce_value({0.9}, {1.0}) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
  CHECK(bce_value({0.5}, {1.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_value({0.5}, {0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(3);
  std::vector<double> p(21), y(21);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = rng.uniform(0.02, 0.98);
    y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  }
  double oracle = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    oracle += y[i] * std::log(p[i]) + (1.0 - y[i]) * std::log(1.0 - p[i]);
  oracle = -oracle / static_cast<double>(p.size());
  CHECK(bce_value(p, y) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("evaluator loss rejects misaligned batches") {
  Tape t;
  CHECK_THROWS_AS(evaluator_loss(t, t.leaf(Mat::Zero(3, 1)), Mat::Zero(4, 1)), Error);
}

TEST_CASE("roc_auc on hand-computed examples") {
  // Perfect separation.
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == doctest::Approx(1.0));
  // Perfectly wrong.
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == doctest::Approx(0.0));
  // One inversion: pairs = 4, correct = 3 -> 0.75.
  CHECK(roc_auc({0.1, 0.6, 0.5, 0.9}, {0, 0, 1, 1}) == doctest::Approx(0.75));
  // All ties -> 0.5.
  CHECK(roc_auc({0.3, 0.3, 0.3, 0.3}, {0, 1, 0, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(roc_auc({0.3, 0.4}, {1, 1}), Error);
}

TEST_CASE("evaluator and discriminator share the architecture hash") {
  GanConfig g;
  EvalConfig e;
  const auto d_cfg = discriminator_config(64, g);
  const auto e_cfg = evaluator_config(64, e);
  CHECK(d_cfg.arch_hash() == e_cfg.arch_hash());
  CHECK(d_cfg.arch_string() == e_cfg.arch_string());
}

TEST_CASE("train_evaluator: smoke on separable data, determinism, errors") {
  const auto train = separable_scenes(3, 16, 2);
  const auto val = separable_scenes(1, 16, 9);
  EvalConfig cfg;
  cfg.epochs = 12;
  cfg.batch = 32;
  cfg.width = 24;
  cfg.blocks = 1;
  cfg.seed = 4;
  cfg.lr = 3e-3;

  const TrainEvalResult a = train_evaluator(train, val, cfg);
  CHECK(a.history.size() == 12);
  CHECK(a.history.back().val_auc > 0.9);

  const TrainEvalResult b = train_evaluator(train, val, cfg);
  CHECK(a.evaluator.param_hash() == b.evaluator.param_hash());

  // Single-class split is refused.
  auto pos_only = train;
  for (auto& s : pos_only) {
    std::vector<LabeledGrasp> keep;
    for (auto& lg : s.grasps)
      if (lg.positive) keep.push_back(lg);
    s.grasps = keep;
  }
  CHECK_THROWS_AS(train_evaluator(pos_only, val, cfg), Error);
}

TEST_CASE("score_grasps: order, duplicates, batch invariance, shape error") {
  const auto scenes = separable_scenes(1, 16, 5);
  EvalConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 16;
  cfg.width = 16;
  cfg.blocks = 1;
  const Network net = train_evaluator(scenes, {}, cfg).evaluator;

  std::vector<Grasp> grasps;
  for (int i = 0; i < 7; ++i) {
    Grasp g;
    g.rotation = rot_z(0.1 * i);
    g.translation = Vec3(0.01 * i, 0, 0.03);
    g.joints.setConstant(0.4);
    grasps.push_back(g);
  }
  grasps.push_back(grasps[2]);  // duplicate

  const auto scores = score_grasps(net, scenes[0].bps, grasps);
  REQUIRE(scores.size() == grasps.size());
  CHECK(scores[2] == scores.back());
  for (double s : scores) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }

  //

  // Scoring one by one equals scoring as a batch.
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    const auto single = score_grasps(net, scenes[0].bps, {grasps[i]});
    CHECK(std::abs(single[0] - scores[i]) < 1e-12);
  }

  // Wrong BPS width -> shape error.
  std::vector<double> wrong(8, 0.1);
  CHECK_THROWS_AS(score_grasps(net, wrong, grasps), Error);
  CHECK_THROWS_AS(score_grasps(net, scenes[0].bps, {}), Error);
}
