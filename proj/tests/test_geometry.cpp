#include <doctest.h>

#include <cmath>

#include "dexgrasp/geometry.hpp"
#include "dexgrasp/rng.hpp"

using namespace dexgrasp;

namespace {

Mat3 random_rotation(Rng& rng) {
  // Uniform-enough for property tests: random axis, random angle.
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  while (axis.norm() < 1e-6) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
  return Eigen::AngleAxisd(rng.uniform(0.0, M_PI), axis.normalized())
      .toRotationMatrix();
}

// Independent oracle: angle between rotations via the quaternion dot product.
double quaternion_angle(const Mat3& a, const Mat3& b) {
  Eigen::Quaterniond qa(a), qb(b);
  const double d = std::min(1.0, std::abs(qa.dot(qb)));
  return 2.0 * std::acos(d);
}

}  // namespace

TEST_CASE("geodesic distance basics") {
  const Mat3 I = Mat3::Identity();
  CHECK(geodesic_distance(I, I) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(geodesic_distance(I, rot_z(M_PI)) == doctest::Approx(M_PI).epsilon(1e-9));
  CHECK(geodesic_distance(rot_x(0.3), rot_x(1.0)) ==
        doctest::Approx(0.7).epsilon(1e-9));
  CHECK(geodesic_distance(rot_x(0.3), rot_x(1.0)) ==
        doctest::Approx(quaternion_angle(rot_x(0.3), rot_x(1.0))).epsilon(1e-9));
}

TEST_CASE("geodesic distance properties over random rotations") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const Mat3 a = random_rotation(rng);
    const Mat3 b = random_rotation(rng);
    const double d_ab = geodesic_distance(a, b);
    const double d_ba = geodesic_distance(b, a);
    CHECK(d_ab == doctest::Approx(d_ba).epsilon(1e-12));
    CHECK(d_ab >= 0.0);
    CHECK(d_ab <= M_PI + 1e-12);
    // acos near +1 carries ~sqrt(machine eps) noise; the identity bound is 1e-6.
    CHECK(geodesic_distance(a, a) < 1e-6);
    CHECK(d_ab == doctest::Approx(quaternion_angle(a, b)).epsilon(1e-6));
  }
}

TEST_CASE("geodesic rejects malformed rotations") {
  Mat3 bad = Mat3::Identity() * 1.5;  // trace 4.5 -> cos argument 1.75
  CHECK_THROWS_AS(geodesic_distance(bad, Mat3::Identity()), Error);
}

TEST_CASE("rotation6d conversion") {
  Rotation6D straight{Vec3(1, 0, 0), Vec3(0, 1, 0)};
  CHECK((rotation6d_to_rotation(straight) - Mat3::Identity()).norm() ==
        doctest::Approx(0.0).epsilon(1e-12));

  Rotation6D scaled{Vec3(2, 0, 0), Vec3(0, 3, 0)};
  CHECK((rotation6d_to_rotation(scaled) - Mat3::Identity()).norm() ==
        doctest::Approx(0.0).epsilon(1e-12));

  // Hand-computed Gram-Schmidt: first column (1,1,0)/sqrt(2).
  Rotation6D skew{Vec3(1, 1, 0), Vec3(0, 1, 0)};
  const Mat3 m = rotation6d_to_rotation(skew);
  CHECK(m.col(0).x() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(m.col(0).y() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(m.col(0).z() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(is_valid_rotation(m));

  CHECK_THROWS_AS(rotation6d_to_rotation({Vec3::Zero(), Vec3(0, 1, 0)}), Error);
  CHECK_THROWS_AS(rotation6d_to_rotation({Vec3(1, 0, 0), Vec3(2, 0, 0)}), Error);
}

TEST_CASE("rotation6d random validity and round trip") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    Rotation6D r{Vec3(rng.normal(), rng.normal(), rng.normal()),
                 Vec3(rng.normal(), rng.normal(), rng.normal())};
    if (r.a.norm() < 1e-4 || r.a.cross(r.b).norm() < 1e-4) continue;
    CHECK(is_valid_rotation(rotation6d_to_rotation(r)));
  }
  for (int i = 0; i < 1000; ++i) {
    const Mat3 m = random_rotation(rng);
    const Mat3 back = rotation6d_to_rotation(rotation_to_6d(m));
    CHECK((back - m).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("grasp distances") {
  Grasp a, b;
  CHECK(grasp_translation_distance(a, b) == doctest::Approx(0.0));
  CHECK(joint_distance(a, b) == doctest::Approx(0.0));

  b.translation = Vec3(1, 0, 0);
  CHECK(grasp_translation_distance(a, b) == doctest::Approx(1.0));
  a.translation = Vec3(1, 2, 2);
  b.translation = Vec3::Zero();
  CHECK(grasp_translation_distance(a, b) == doctest::Approx(3.0));

  a = Grasp{};
  b = Grasp{};
  b.joints.setConstant(0.5);
  CHECK(joint_distance(a, b) == doctest::Approx(0.5 * std::sqrt(12.0)));

  // Naive elementwise oracle on a random pair.
  Rng rng(3);
  for (int i = 0; i < 12; ++i) {
    a.joints[i] = rng.uniform(0.0, 1.5);
    b.joints[i] = rng.uniform(0.0, 1.5);
  }
  double acc = 0.0;
  for (int i = 0; i < 12; ++i) acc += (a.joints[i] - b.joints[i]) * (a.joints[i] - b.joints[i]);
  CHECK(joint_distance(a, b) == doctest::Approx(std::sqrt(acc)).epsilon(1e-12));
}

TEST_CASE("grasp validation") {
  const JointLimits limits = JointLimits::defaults();
  Grasp g;
  g.joints.setConstant(0.3);
  CHECK_NOTHROW(validate_grasp(g, limits));

  Grasp far = g;
  far.translation = Vec3(2.0, 0, 0);
  CHECK_THROWS_AS(validate_grasp(far, limits), Error);

  Grasp bent = g;
  bent.joints[4] = 3.0;
  CHECK_THROWS_AS(validate_grasp(bent, limits), Error);
}

TEST_CASE("grasp json round trip") {
  Rng rng(5);
  Grasp g;
  g.rotation = random_rotation(rng);
  g.translation = Vec3(0.01, -0.02, 0.05);
  for (int i = 0; i < 12; ++i) g.joints[i] = rng.uniform(0.0, 1.0);
  const Grasp back = grasp_from_json(grasp_to_json(g));
  CHECK((back.rotation - g.rotation).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK((back.translation - g.translation).norm() == doctest::Approx(0.0));
  CHECK((back.joints - g.joints).norm() == doctest::Approx(0.0));

  // Row-major layout of "R".
  const auto j = grasp_to_json(g);
  CHECK(j["R"][1].get<double>() == doctest::Approx(g.rotation(0, 1)));
  CHECK(j["R"][3].get<double>() == doctest::Approx(g.rotation(1, 0)));
}
