#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "dexgrasp/metrics.hpp"
#include "dexgrasp/rng.hpp"

using namespace dexgrasp;

namespace {

Mat3 random_rotation(Rng& rng) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  while (axis.norm() < 1e-9) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
  return Eigen::AngleAxisd(rng.uniform(0, M_PI), axis.normalized()).toRotationMatrix();
}

Grasp random_grasp(Rng& rng) {
  Grasp g;
  g.rotation = random_rotation(rng);
  g.translation = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                       rng.uniform(-0.2, 0.2));
  for (int i = 0; i < kJointCount; ++i) g.joints[i] = rng.uniform(0.0, 1.5);
  return g;
}

std::vector<Grasp> random_set(int n, Rng& rng) {
  std::vector<Grasp> out;
  for (int i = 0; i < n; ++i) out.push_back(random_grasp(rng));
  return out;
}

// Independent O(n^2) oracle using a full distance matrix.
struct BruteMagd {
  std::vector<int> matched;
  std::vector<double> dt, dr, dj;
  double cov = 0.0;
};

BruteMagd brute_force(const std::vector<Grasp>& gen, const std::vector<Grasp>& gt) {
  BruteMagd out;
  std::vector<std::vector<double>> dist(gen.size(), std::vector<double>(gt.size()));
  for (std::size_t i = 0; i < gen.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j)
      dist[i][j] = (gen[i].translation - gt[j].translation).norm();
  std::set<int> marked;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < gt.size(); ++j)
      if (dist[i][j] < dist[i][arg]) arg = j;
    out.matched.push_back(static_cast<int>(arg));
    marked.insert(static_cast<int>(arg));
    out.dt.push_back(dist[i][arg]);
    out.dr.push_back(geodesic_distance(gen[i].rotation, gt[arg].rotation));
    out.dj.push_back((gen[i].joints - gt[arg].joints).norm());
  }
  out.cov = static_cast<double>(marked.size()) / static_cast<double>(gt.size());
  return out;
}

}  // namespace

TEST_CASE("magd on identical sets is zero") {
  Rng rng(2);
  const auto set = random_set(20, rng);
  const MagdReport r = magd(set, set);
  CHECK(r.cum_transl == doctest::Approx(0.0));
  CHECK(r.cum_joint == doctest::Approx(0.0));
  CHECK(r.cum_rot < 20 * 1e-6);  // acos noise near identity
  for (std::size_t i = 0; i < set.size(); ++i) CHECK(r.matched[i] == static_cast<int>(i));
}

TEST_CASE("magd single-pair case") {
  Grasp gen;
  gen.translation = Vec3(1, 0, 0);
  Grasp gt;
  gt.rotation = rot_z(M_PI / 2);
  const MagdReport r = magd({gen}, {gt});
  CHECK(r.d_transl[0] == doctest::Approx(1.0));
  CHECK(r.d_rot[0] == doctest::Approx(M_PI / 2));
  CHECK(r.d_joint[0] == doctest::Approx(0.0));
  CHECK(r.cum_transl == doctest::Approx(1.0));
  CHECK(r.mean_transl == doctest::Approx(1.0));
}

TEST_CASE("magd and coverage match the brute-force oracle") {
  Rng rng(5);
  for (int rep = 0; rep < 12; ++rep) {
    const int n_gen = 1 + static_cast<int>(rng.uniform_int(100));
    const int n_gt = 1 + static_cast<int>(rng.uniform_int(100));
    const auto gen = random_set(n_gen, rng);
    const auto gt = random_set(n_gt, rng);
    const MagdReport r = magd(gen, gt);
    const CoverageReport c = coverage(gen, gt);
    const BruteMagd b = brute_force(gen, gt);
    for (int i = 0; i < n_gen; ++i) {
      CHECK(r.matched[static_cast<std::size_t>(i)] == b.matched[static_cast<std::size_t>(i)]);
      CHECK(r.d_transl[static_cast<std::size_t>(i)] == doctest::Approx(b.dt[static_cast<std::size_t>(i)]).epsilon(1e-12));
      CHECK(r.d_rot[static_cast<std::size_t>(i)] == doctest::Approx(b.dr[static_cast<std::size_t>(i)]).epsilon(1e-12));
      CHECK(r.d_joint[static_cast<std::size_t>(i)] == doctest::Approx(b.dj[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
    CHECK(c.cov == doctest::Approx(b.cov).epsilon(1e-15));
  }
}

TEST_CASE("coverage trivial cases and monotonicity") {
  // Each gen grasp nearest a distinct gt grasp.
  std::vector<Grasp> gt(4), gen(4);
  for (int i = 0; i < 4; ++i) {
    gt[static_cast<std::size_t>(i)].translation = Vec3(i, 0, 0);
    gen[static_cast<std::size_t>(i)].translation = Vec3(i + 0.01, 0, 0);
  }
  CHECK(coverage(gen, gt).cov == doctest::Approx(1.0));

  // All gen grasps nearest one gt grasp out of 10.
  std::vector<Grasp> gt10(10);
  for (int i = 0; i < 10; ++i) gt10[static_cast<std::size_t>(i)].translation = Vec3(i, 0, 0);
  std::vector<Grasp> clustered(7);
  for (auto& g : clustered) g.translation = Vec3(0.1, 0, 0);
  CHECK(coverage(clustered, gt10).cov == doctest::Approx(0.1));

  // Appending grasps never decreases coverage.
  Rng rng(7);
  auto gen_grow = random_set(5, rng);
  const auto gt_rand = random_set(30, rng);
  double prev = coverage(gen_grow, gt_rand).cov;
  for (int step = 0; step < 10; ++step) {
    gen_grow.push_back(random_grasp(rng));
    const double cov = coverage(gen_grow, gt_rand).cov;
    CHECK(cov >= prev - 1e-15);
    prev = cov;
  }
}

TEST_CASE("magd matching uses translation only") {
  Rng rng(9);
  auto gen = random_set(40, rng);
  const auto gt = random_set(25, rng);
  const MagdReport before = magd(gen, gt);
  // Permute rotations (and joints) among the generated grasps.
  for (std::size_t i = gen.size(); i > 1; --i) {
    const auto j = rng.uniform_int(i);
    std::swap(gen[i - 1].rotation, gen[j].rotation);
    std::swap(gen[i - 1].joints, gen[j].joints);
  }
  const MagdReport after = magd(gen, gt);
  CHECK(before.matched == after.matched);
  for (std::size_t i = 0; i < gen.size(); ++i)
    CHECK(before.d_transl[i] == doctest::Approx(after.d_transl[i]).epsilon(1e-15));
}

TEST_CASE("magd rigid-motion equivariance") {
  Rng rng(11);
  const auto gen = random_set(30, rng);
  const auto gt = random_set(20, rng);
  const MagdReport base = magd(gen, gt);

  const Mat3 r = random_rotation(rng);
  const Vec3 t(0.3, -0.2, 0.5);
  auto transform = [&](std::vector<Grasp> set) {
    for (auto& g : set) {
      g.rotation = r * g.rotation;
      g.translation = r * g.translation + t;
    }
    return set;
  };
  const MagdReport moved = magd(transform(gen), transform(gt));
  CHECK(moved.matched == base.matched);
  CHECK(moved.cum_transl == doctest::Approx(base.cum_transl).epsilon(1e-9));
  CHECK(moved.cum_rot == doctest::Approx(base.cum_rot).epsilon(1e-7));
  CHECK(moved.cum_joint == doctest::Approx(base.cum_joint).epsilon(1e-12));
}

TEST_CASE("ties break to the lowest ground-truth index") {
  Grasp gen;
  gen.translation = Vec3(0, 0, 0);
  std::vector<Grasp> gt(3);
  gt[0].translation = Vec3(0.5, 0, 0);
  gt[1].translation = Vec3(-0.5, 0, 0);
  gt[2].translation = Vec3(0, 0.5, 0);
  CHECK(magd({gen}, gt).matched[0] == 0);
  CHECK(coverage({gen}, gt).matched_gt == std::vector<int>{0});
}

TEST_CASE("empty sets are rejected") {
  std::vector<Grasp> some(3);
  CHECK_THROWS_AS(magd({}, some), Error);
  CHECK_THROWS_AS(magd(some, {}), Error);
  CHECK_THROWS_AS(coverage({}, some), Error);
}

TEST_CASE("sample_grasps determinism and non-degeneracy") {
  GanConfig cfg;
  cfg.width = 24;
  cfg.blocks = 1;
  cfg.latent_dim = 4;
  const Network gen(generator_config(16, cfg));
  std::vector<double> bps(16, 0.3);

  const auto a = sample_grasps(gen, bps, 50, 7);
  const auto b = sample_grasps(gen, bps, 50, 7);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].translation == b[i].translation);
    CHECK(a[i].rotation == b[i].rotation);
    CHECK(a[i].joints == b[i].joints);
  }

  const auto c = sample_grasps(gen, bps, 50, 8);
  double min_pair = 1e9;
  for (std::size_t i = 0; i < a.size(); ++i)
    min_pair = std::min(min_pair, (a[i].translation - c[i].translation).norm());
  CHECK(min_pair > 0.0);
}

TEST_CASE("metrics csv header matches the documented schema") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dexgrasp_metrics_csv";
  fs::create_directories(dir);
  write_metrics_csv(dir / "m.csv", {MetricsRow{}});
  std::ifstream is(dir / "m.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "scene_id,n_gen,n_gt,magd_t_cum,magd_r_cum,magd_j_cum,magd_t_mean,"
        "magd_r_mean,magd_j_mean,cov");
}
