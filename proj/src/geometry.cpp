#include "dexgrasp/geometry.hpp"

#include <cmath>

namespace dexgrasp {

JointLimits JointLimits::defaults() {
  JointLimits l;
  l.lower.setZero();
  l.upper.setConstant(M_PI / 2.0);
  return l;
}

bool is_valid_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  const Mat3 should_be_identity = m.transpose() * m;
  if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
    return false;
  return std::abs(m.determinant() - 1.0) <= tol;
}

void validate_grasp(const Grasp& g, const JointLimits& limits,
                    double workspace_radius) {
  require(is_valid_rotation(g.rotation), Errc::invalid_rotation,
          "grasp rotation is not orthonormal with det +1");
  require(g.translation.allFinite() &&
              g.translation.norm() <= workspace_radius + 1e-12,
          Errc::invalid_grasp, "translation outside workspace radius");
  for (int i = 0; i < kJointCount; ++i) {
    require(g.joints[i] >= limits.lower[i] - 1e-12 &&
                g.joints[i] <= limits.upper[i] + 1e-12,
            Errc::invalid_grasp,
            "joint " + std::to_string(i) + " outside limits");
  }
}

double geodesic_distance(const Mat3& a, const Mat3& b) {
  const double cos_angle = ((a.transpose() * b).trace() - 1.0) / 2.0;
  require(cos_angle >= -1.0 - 1e-6 && cos_angle <= 1.0 + 1e-6,
          Errc::invalid_rotation,
          "geodesic cosine argument out of range: " + std::to_string(cos_angle));
  const double clamped = std::min(1.0, std::max(-1.0, cos_angle));
  return std::abs(std::acos(clamped));
}

Mat3 rotation6d_to_rotation(const Rotation6D& r) {
  const double na = r.a.norm();
  require(na > 1e-8, Errc::degenerate_parameterization,
          "first 6D vector has near-zero norm");
  const Vec3 c0 = r.a / na;
  Vec3 b_orth = r.b - c0.dot(r.b) * c0;
  const double nb = b_orth.norm();
  require(nb > 1e-8, Errc::degenerate_parameterization,
          "6D vectors are near-parallel");
  const Vec3 c1 = b_orth / nb;
  Mat3 m;
  m.col(0) = c0;
  m.col(1) = c1;
  m.col(2) = c0.cross(c1);
  return m;
}

Rotation6D rotation_to_6d(const Mat3& m) { return {m.col(0), m.col(1)}; }

double grasp_translation_distance(const Grasp& a, const Grasp& b) {
  return (a.translation - b.translation).norm();
}

double joint_distance(const Grasp& a, const Grasp& b) {
  return (a.joints - b.joints).norm();
}

Mat3 rot_x(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix();
}

Mat3 rot_y(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
}

Mat3 rot_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

Vec3 any_perpendicular(const Vec3& v) {
  const Vec3 axis =
      std::abs(v.x()) < 0.9 * v.norm() ? Vec3::UnitX() : Vec3::UnitY();
  return v.cross(axis).normalized();
}

nlohmann::json grasp_to_json(const Grasp& g) {
  nlohmann::json j;
  std::vector<double> r(9);
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) r[3 * row + col] = g.rotation(row, col);
  j["R"] = r;
  j["t"] = std::vector<double>{g.translation.x(), g.translation.y(),
                               g.translation.z()};
  std::vector<double> joints(kJointCount);
  for (int i = 0; i < kJointCount; ++i) joints[i] = g.joints[i];
  j["j"] = joints;
  return j;
}

Grasp grasp_from_json(const nlohmann::json& j) {
  Grasp g;
  const auto& r = j.at("R");
  require(r.size() == 9, Errc::shape_mismatch, "grasp R must have 9 entries");
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col)
      g.rotation(row, col) = r[3 * row + col].get<double>();
  const auto& t = j.at("t");
  require(t.size() == 3, Errc::shape_mismatch, "grasp t must have 3 entries");
  for (int i = 0; i < 3; ++i) g.translation[i] = t[i].get<double>();
  const auto& joints = j.at("j");
  require(joints.size() == kJointCount, Errc::shape_mismatch,
          "grasp j must have 12 entries");
  for (int i = 0; i < kJointCount; ++i) g.joints[i] = joints[i].get<double>();
  return g;
}

}  // namespace dexgrasp
