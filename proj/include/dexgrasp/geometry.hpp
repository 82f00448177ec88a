#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <string>

#include "dexgrasp/errors.hpp"

#include <json.hpp>

namespace dexgrasp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Joints = Eigen::Matrix<double, 12, 1>;

inline constexpr int kJointCount = 12;

/// Two unnormalized 3-vectors; the continuous rotation head emitted by the
/// generator. Maps onto the first two columns of the rotation matrix.
struct Rotation6D {
  Vec3 a = Vec3::UnitX();
  Vec3 b = Vec3::UnitY();
};

/// Per-joint [lower, upper] angle limits in radians.
struct JointLimits {
  Joints lower;
  Joints upper;

  /// Toy-hand default: every joint in [0, pi/2].
  static JointLimits defaults();
};

/// A dexterous grasp: palm pose in SE(3) plus the 12-DOF finger
/// configuration. Translations are expressed in the object-centroid frame
/// unless a caller documents otherwise.
struct Grasp {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Joints joints = Joints::Zero();

  /// Palm approach direction (third rotation column, pointing at the object).
  Vec3 approach_axis() const { return rotation.col(2); }
  /// Finger closing direction (first rotation column).
  Vec3 closing_axis() const { return rotation.col(0); }
};

bool is_valid_rotation(const Mat3& m, double tol = 1e-6);

/// Throws invalid-rotation / invalid-grasp when an invariant is broken.
void validate_grasp(const Grasp& g, const JointLimits& limits,
                    double workspace_radius = 1.0);

/// Angle |arccos((trace(a^T b) - 1) / 2)| in [0, pi].
/// Cosine arguments outside [-1, 1] by more than 1e-6 indicate a malformed
/// rotation and throw; smaller excursions are clamped.
double geodesic_distance(const Mat3& a, const Mat3& b);

/// Gram-Schmidt orthonormalization of the 6D head:
///   c0 = normalize(a); c1 = normalize(b - (c0.b) c0); c2 = c0 x c1.
/// Throws degenerate-parameterization for near-zero or near-parallel input.
Mat3 rotation6d_to_rotation(const Rotation6D& r);

/// First two columns of a rotation matrix; the exact inverse of
/// rotation6d_to_rotation on valid rotations.
Rotation6D rotation_to_6d(const Mat3& m);

double grasp_translation_distance(const Grasp& a, const Grasp& b);
double joint_distance(const Grasp& a, const Grasp& b);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// Some unit vector orthogonal to `v` (deterministic choice).
Vec3 any_perpendicular(const Vec3& v);

/// JSON schema: {"R": [9 row-major], "t": [3], "j": [12]}.
nlohmann::json grasp_to_json(const Grasp& g);
Grasp grasp_from_json(const nlohmann::json& j);

}  // namespace dexgrasp
