#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "dexgrasp/geometry.hpp"

namespace dexgrasp {

struct PointCloud {
  std::vector<Vec3> points;
  /// Optional per-point segmentation mask; empty means "no mask".
  std::vector<std::uint8_t> mask;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  Vec3 centroid() const;
};

/// Fixed random basis points inside the unit ball. Regenerating with the
/// same (count, seed) reproduces the exact same points.
struct BpsBasis {
  std::vector<Vec3> points;
  std::uint64_t seed = 0;

  static BpsBasis generate(int count, std::uint64_t seed = 42);
};

/// BPS encoding of a cloud: per basis point, the distance to the nearest
/// cloud point, plus the centroid/scale needed to map grasps back out of
/// the normalized frame.
struct BpsFeature {
  std::vector<double> distances;
  Vec3 centroid_offset = Vec3::Zero();
  double scale = 1.0;
};

/// Default global scale applied after centroid subtraction (see
/// encode_scene_cloud). Chosen so desk objects land inside the unit ball.
inline constexpr double kDefaultCloudScale = 0.15;

/// Removes the best-supported plane. Returns the points farther than
/// `threshold` from that plane, preserving order (and mask entries).
PointCloud ransac_remove_plane(const PointCloud& cloud, double threshold,
                               int iterations, std::uint64_t seed);

/// Translates the cloud so its centroid is at the origin; returns the
/// centered cloud and the removed centroid.
std::pair<PointCloud, Vec3> normalize_to_centroid(const PointCloud& cloud);

/// distances[i] = min over cloud points p of |basis_i - p|. Expects a cloud
/// already normalized/scaled by the caller; fills only `distances`.
/// Accelerated by a voxel grid; exact.
BpsFeature bps_encode(const PointCloud& cloud, const BpsBasis& basis);

/// Full conditioning-feature pipeline: centroid-normalize, divide by the
/// fixed global scale, then encode. Records centroid and scale.
BpsFeature encode_scene_cloud(const PointCloud& cloud, const BpsBasis& basis,
                              double scale = kDefaultCloudScale);

/// Keeps exactly the masked points, order-preserving.
PointCloud crop_by_mask(const PointCloud& cloud,
                        const std::vector<std::uint8_t>& mask);

// ---- I/O ----

/// ASCII PLY with an `element vertex` of float x,y,z properties.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_ply(const std::filesystem::path& path);

/// Raw little-endian float32 N x 3 with an 8-byte (u64 LE) count header.
void write_cloud_f32(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_cloud_f32(const std::filesystem::path& path);

/// BPS feature payload as B little-endian float32 values.
void write_bps_f32(const std::filesystem::path& path, const BpsFeature& f);
std::vector<double> read_bps_f32(const std::filesystem::path& path);

}  // namespace dexgrasp
