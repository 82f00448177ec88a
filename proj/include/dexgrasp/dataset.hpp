#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dexgrasp/geometry.hpp"
#include "dexgrasp/pointcloud.hpp"
#include "dexgrasp/rng.hpp"

namespace dexgrasp {

enum class ShapeKind { box, cylinder, sphere };

const char* shape_name(ShapeKind k);
ShapeKind shape_from_name(const std::string& name);

/// A desk-scale primitive with a world pose. Local frames: boxes are
/// axis-aligned with full extents dims; cylinders have diameter dims.x and
/// height dims.z about local z; spheres use dims.x as diameter.
struct ToyObject {
  ShapeKind shape = ShapeKind::box;
  Vec3 dims = Vec3(0.05, 0.05, 0.05);
  Mat3 pose_r = Mat3::Identity();
  Vec3 pose_t = Vec3::Zero();
  int id = 0;

  /// World direction of the object's resting "up" (local +z).
  Vec3 up() const { return pose_r.col(2); }
};

struct SurfaceSample {
  Vec3 point;   // world
  Vec3 normal;  // world, outward unit
  int face = 0; // box: 0..5 (+x,-x,+y,-y,+z,-z); cylinder: 0 side, 1 top, 2 bottom
};

struct RayHit {
  double t = 0.0;  // distance along the ray
  Vec3 normal = Vec3::UnitZ();
  int face = 0;
};

/// Signed distance from a world point to the object's surface (< 0 inside).
double signed_distance(const ToyObject& obj, const Vec3& world_point);

/// Uniform area-weighted surface sample.
SurfaceSample sample_surface_point(const ToyObject& obj, Rng& rng);

/// Full extent of the object along a world direction (support width).
double support_width(const ToyObject& obj, const Vec3& dir_world);

/// First intersection of the ray origin + t*dir with the surface, t > 1e-9.
std::optional<RayHit> ray_hit(const ToyObject& obj, const Vec3& origin,
                              const Vec3& dir);

// ---- toy hand ----

/// Fixed preshape table and aperture map for the 12-DOF toy hand. The grip
/// aperture is an affine function of the mean joint angle, so planner
/// preshapes and the labeling check share one definition.
struct HandModel {
  double max_aperture = 0.12;   // meters
  double joint_max = M_PI / 2;  // each joint in [0, joint_max]
  int preshape_bins = 8;

  double aperture(const Joints& j) const;
  /// Preshape for gripping width w, via the binned table.
  Joints preshape_for_width(double w) const;
};

struct LabelParams {
  double standoff_min = 0.02;
  double standoff_max = 0.06;
  double approach_tolerance = 20.0 * M_PI / 180.0;  // vs inward normal
  double width_tolerance = 0.015;
  /// Approach axes with a larger dot against the object's up are treated
  /// as coming from below the support and rejected.
  double support_max_updot = 0.25;
  HandModel hand;
};

/// Analytic lift-success surrogate: standoff window along the approach ray,
/// approach/normal alignment, aperture vs object width, no palm
/// penetration, and not approaching through the support.
bool label_grasp(const ToyObject& obj, const Grasp& g,
                 const LabelParams& params = {});

/// Single-view surface sample: keeps points whose outward normal has
/// negative dot product with camera_dir.
PointCloud sample_partial_view(const ToyObject& obj, const Vec3& camera_dir,
                               int points, std::uint64_t seed);

enum class PlannerSpread { nominal, exploratory };

/// Surface-normal grasp candidates: approach along the inward normal, palm
/// standoff off the surface, roll sampled about the approach axis, joints
/// from the preshape table. Covers every face the sampler reaches
/// (including support-blocked ones; labeling sorts those out).
std::vector<Grasp> heuristic_plan_grasps(
    const ToyObject& obj, int count, std::uint64_t seed,
    const LabelParams& params = {},
    PlannerSpread spread = PlannerSpread::nominal);

// ---- dataset build ----

struct DatasetConfig {
  int objects = 20;
  int views_per_object = 5;
  int grasps_per_label = 100;  // positives and negatives per scene
  int view_points = 1024;
  int surface_points = 4096;
  int bps_size = 1024;
  std::uint64_t bps_seed = 42;
  std::uint64_t master_seed = 1;
  double cloud_scale = kDefaultCloudScale;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  double ransac_threshold = 0.005;
  int ransac_iterations = 128;
  int table_points = 1536;
  LabelParams label;

  std::string canonical_string() const;
  std::uint64_t config_hash() const;
};

struct LabeledGrasp {
  Grasp grasp;
  bool positive = false;
};

struct SceneRecord {
  int scene_index = 0;
  ToyObject object;
  PointCloud view_cloud;           // world frame, plane removed
  BpsFeature bps;
  std::vector<Grasp> positives;    // object-centroid frame
  std::vector<Grasp> negatives;
  std::string name;                // directory name
};

struct DatasetManifest {
  DatasetConfig config;
  std::vector<std::string> scene_names;
  std::vector<int> train_scenes, val_scenes, test_scenes;
};

/// Builds one scene (deterministic in (config, scene_index)).
SceneRecord build_scene(const DatasetConfig& cfg, const BpsBasis& basis,
                        int scene_index);

/// Generates all scenes, writes one directory per scene plus manifest.json.
DatasetManifest build_dataset(const DatasetConfig& cfg,
                              const std::filesystem::path& out_dir,
                              int threads = 1);

/// A scene loaded back from disk; grasps are in the object-centroid frame.
struct LoadedScene {
  std::string name;
  PointCloud cloud;
  std::vector<double> bps;
  Vec3 centroid = Vec3::Zero();
  double scale = 1.0;
  std::vector<LabeledGrasp> grasps;
  std::optional<ToyObject> object;  // present for generated toy scenes
  /// Ground-truth part memberships (point indices), for composite scenes.
  std::map<std::string, std::vector<int>> parts;
};

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);
LoadedScene load_scene(const std::filesystem::path& scene_dir);

void write_manifest(const std::filesystem::path& dataset_dir,
                    const DatasetManifest& manifest);
void write_scene(const std::filesystem::path& dataset_dir,
                 const SceneRecord& scene, double cloud_scale);

/// Demo two-part object for the task-oriented pipeline: a thin vertical
/// handle box with a wider head box on top. Returns the combined cloud in
/// the world frame plus each part's point indices.
struct CompositeScene {
  PointCloud cloud;
  std::vector<std::uint8_t> handle_mask;
  std::vector<std::uint8_t> head_mask;
};
CompositeScene build_hammer_cloud(int points_per_part, std::uint64_t seed);

/// Writes the hammer demo scene (cloud, bps, scene.json) for the afford CLI.
void write_hammer_scene(const std::filesystem::path& scene_dir,
                        const BpsBasis& basis, std::uint64_t seed,
                        double cloud_scale = kDefaultCloudScale);

}  // namespace dexgrasp
