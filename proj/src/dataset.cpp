#include "dexgrasp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "dexgrasp/network.hpp"  // fnv1a_hash

namespace dexgrasp {

const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::box: return "box";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::sphere: return "sphere";
  }
  return "unknown";
}

ShapeKind shape_from_name(const std::string& name) {
  if (name == "box") return ShapeKind::box;
  if (name == "cylinder") return ShapeKind::cylinder;
  if (name == "sphere") return ShapeKind::sphere;
  fail(Errc::config, "unknown shape '" + name + "'");
}

namespace {

Vec3 to_local(const ToyObject& obj, const Vec3& world) {
  return obj.pose_r.transpose() * (world - obj.pose_t);
}

Vec3 dir_to_local(const ToyObject& obj, const Vec3& dir) {
  return obj.pose_r.transpose() * dir;
}

}  // namespace

double signed_distance(const ToyObject& obj, const Vec3& world_point) {
  const Vec3 p = to_local(obj, world_point);
  switch (obj.shape) {
    case ShapeKind::box: {
      const Vec3 h = obj.dims / 2.0;
      const Vec3 q = p.cwiseAbs() - h;
      const double outside = q.cwiseMax(0.0).norm();
      const double inside = std::min(q.maxCoeff(), 0.0);
      return outside + inside;
    }
    case ShapeKind::cylinder: {
      const double r = obj.dims.x() / 2.0;
      const double hh = obj.dims.z() / 2.0;
      const double dr = std::hypot(p.x(), p.y()) - r;
      const double dz = std::abs(p.z()) - hh;
      const double outside =
          std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
      const double inside = std::min(std::max(dr, dz), 0.0);
      return outside + inside;
    }
    case ShapeKind::sphere:
      return p.norm() - obj.dims.x() / 2.0;
  }
  fail(Errc::config, "unhandled shape");
}

SurfaceSample sample_surface_point(const ToyObject& obj, Rng& rng) {
  Vec3 p_local, n_local;
  int face = 0;
  switch (obj.shape) {
    case ShapeKind::box: {
      const Vec3 h = obj.dims / 2.0;
      const double ax = obj.dims.y() * obj.dims.z();
      const double ay = obj.dims.x() * obj.dims.z();
      const double az = obj.dims.x() * obj.dims.y();
      const double total = 2.0 * (ax + ay + az);
      double pick = rng.uniform(0.0, total);
      const double u = rng.uniform(-1.0, 1.0);
      const double v = rng.uniform(-1.0, 1.0);
      if (pick < 2 * ax) {
        const double sgn = pick < ax ? 1.0 : -1.0;
        p_local = Vec3(sgn * h.x(), u * h.y(), v * h.z());
        n_local = Vec3(sgn, 0, 0);
        face = sgn > 0 ? 0 : 1;
      } else if (pick < 2 * ax + 2 * ay) {
        pick -= 2 * ax;
        const double sgn = pick < ay ? 1.0 : -1.0;
        p_local = Vec3(u * h.x(), sgn * h.y(), v * h.z());
        n_local = Vec3(0, sgn, 0);
        face = sgn > 0 ? 2 : 3;
      } else {
        pick -= 2 * ax + 2 * ay;
        const double sgn = pick < az ? 1.0 : -1.0;
        p_local = Vec3(u * h.x(), v * h.y(), sgn * h.z());
        n_local = Vec3(0, 0, sgn);
        face = sgn > 0 ? 4 : 5;
      }
      break;
    }
    case ShapeKind::cylinder: {
      const double r = obj.dims.x() / 2.0;
      const double hh = obj.dims.z() / 2.0;
      const double side_area = 2.0 * M_PI * r * obj.dims.z();
      const double cap_area = M_PI * r * r;
      const double pick = rng.uniform(0.0, side_area + 2 * cap_area);
      if (pick < side_area) {
        const double theta = rng.uniform(0.0, 2.0 * M_PI);
        const double z = rng.uniform(-hh, hh);
        n_local = Vec3(std::cos(theta), std::sin(theta), 0.0);
        p_local = Vec3(r * n_local.x(), r * n_local.y(), z);
        face = 0;
      } else {
        const double sgn = pick < side_area + cap_area ? 1.0 : -1.0;
        const double rad = r * std::sqrt(rng.uniform());
        const double theta = rng.uniform(0.0, 2.0 * M_PI);
        p_local = Vec3(rad * std::cos(theta), rad * std::sin(theta), sgn * hh);
        n_local = Vec3(0, 0, sgn);
        face = sgn > 0 ? 1 : 2;
      }
      break;
    }
    case ShapeKind::sphere: {
      Vec3 dir(rng.normal(), rng.normal(), rng.normal());
      while (dir.norm() < 1e-9) dir = Vec3(rng.normal(), rng.normal(), rng.normal());
      dir.normalize();
      p_local = dir * (obj.dims.x() / 2.0);
      n_local = dir;
      face = 0;
      break;
    }
  }
  SurfaceSample s;
  s.point = obj.pose_r * p_local + obj.pose_t;
  s.normal = obj.pose_r * n_local;
  s.face = face;
  return s;
}

double support_width(const ToyObject& obj, const Vec3& dir_world) {
  const Vec3 d = dir_to_local(obj, dir_world).normalized();
  switch (obj.shape) {
    case ShapeKind::box:
      return obj.dims.x() * std::abs(d.x()) + obj.dims.y() * std::abs(d.y()) +
             obj.dims.z() * std::abs(d.z());
    case ShapeKind::cylinder:
      return obj.dims.x() * std::hypot(d.x(), d.y()) +
             obj.dims.z() * std::abs(d.z());
    case ShapeKind::sphere:
      return obj.dims.x();
  }
  fail(Errc::config, "unhandled shape");
}

std::optional<RayHit> ray_hit(const ToyObject& obj, const Vec3& origin,
                              const Vec3& dir) {
  constexpr double kEps = 1e-9;
  const Vec3 o = to_local(obj, origin);
  const Vec3 d = dir_to_local(obj, dir).normalized();

  auto world_hit = [&](double t, const Vec3& n_local, int face) {
    RayHit h;
    h.t = t;
    h.normal = obj.pose_r * n_local;
    h.face = face;
    return h;
  };

  switch (obj.shape) {
    case ShapeKind::box: {
      const Vec3 h = obj.dims / 2.0;
      double tmin = -std::numeric_limits<double>::infinity();
      double tmax = std::numeric_limits<double>::infinity();
      int enter_axis = -1, exit_axis = -1;
      double enter_sgn = 0.0, exit_sgn = 0.0;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-14) {
          if (std::abs(o[a]) > h[a]) return std::nullopt;
          continue;
        }
        double t0 = (-h[a] - o[a]) / d[a];
        double t1 = (h[a] - o[a]) / d[a];
        double s0 = -1.0, s1 = 1.0;
        if (t0 > t1) {
          std::swap(t0, t1);
          std::swap(s0, s1);
        }
        if (t0 > tmin) {
          tmin = t0;
          enter_axis = a;
          enter_sgn = s0;
        }
        if (t1 < tmax) {
          tmax = t1;
          exit_axis = a;
          exit_sgn = s1;
        }
      }
      if (tmin > tmax || tmax < kEps) return std::nullopt;
      auto face_of = [](int axis, double sgn) {
        return 2 * axis + (sgn > 0 ? 0 : 1);
      };
      if (tmin > kEps) {
        Vec3 n = Vec3::Zero();
        n[enter_axis] = enter_sgn;
        return world_hit(tmin, n, face_of(enter_axis, enter_sgn));
      }
      Vec3 n = Vec3::Zero();
      n[exit_axis] = exit_sgn;
      return world_hit(tmax, n, face_of(exit_axis, exit_sgn));
    }
    case ShapeKind::sphere: {
      const double r = obj.dims.x() / 2.0;
      const double b = o.dot(d);
      const double c = o.squaredNorm() - r * r;
      const double disc = b * b - c;
      if (disc < 0.0) return std::nullopt;
      const double sq = std::sqrt(disc);
      double t = -b - sq;
      if (t < kEps) t = -b + sq;
      if (t < kEps) return std::nullopt;
      const Vec3 n = (o + t * d).normalized();
      return world_hit(t, n, 0);
    }
    case ShapeKind::cylinder: {
      const double r = obj.dims.x() / 2.0;
      const double hh = obj.dims.z() / 2.0;
      double best = std::numeric_limits<double>::infinity();
      Vec3 best_n = Vec3::UnitZ();
      int best_face = 0;
      // Side surface.
      const double a2 = d.x() * d.x() + d.y() * d.y();
      if (a2 > 1e-14) {
        const double b = o.x() * d.x() + o.y() * d.y();
        const double c = o.x() * o.x() + o.y() * o.y() - r * r;
        const double disc = b * b - a2 * c;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          for (double t : {(-b - sq) / a2, (-b + sq) / a2}) {
            if (t < kEps || t >= best) continue;
            const Vec3 p = o + t * d;
            if (std::abs(p.z()) <= hh) {
              best = t;
              best_n = Vec3(p.x(), p.y(), 0).normalized();
              best_face = 0;
            }
          }
        }
      }
      // Caps.
      if (std::abs(d.z()) > 1e-14) {
        for (double sgn : {1.0, -1.0}) {
          const double t = (sgn * hh - o.z()) / d.z();
          if (t < kEps || t >= best) continue;
          const Vec3 p = o + t * d;
          if (p.x() * p.x() + p.y() * p.y() <= r * r) {
            best = t;
            best_n = Vec3(0, 0, sgn);
            best_face = sgn > 0 ? 1 : 2;
          }
        }
      }
      if (!std::isfinite(best)) return std::nullopt;
      return world_hit(best, best_n, best_face);
    }
  }
  fail(Errc::config, "unhandled shape");
}

double HandModel::aperture(const Joints& j) const {
  const double mean = j.mean();
  return std::max(0.0, max_aperture * (1.0 - mean / joint_max));
}

Joints HandModel::preshape_for_width(double w) const {
  const double clamped = std::min(std::max(w, 0.0), max_aperture);
  int bin = static_cast<int>(std::floor(clamped / max_aperture *
                                        static_cast<double>(preshape_bins)));
  bin = std::min(bin, preshape_bins - 1);
  const double w_center =
      (bin + 0.5) * max_aperture / static_cast<double>(preshape_bins);
  const double q = (1.0 - w_center / max_aperture) * joint_max;
  Joints j;
  for (int i = 0; i < kJointCount; ++i)
    j[i] = q + (i % 2 == 0 ? 0.04 : -0.04);  // zero-mean finger spread
  return j;
}

bool label_grasp(const ToyObject& obj, const Grasp& g,
                 const LabelParams& params) {
  const Vec3 approach = g.approach_axis();
  // Palm body must stay outside the object.
  if (signed_distance(obj, g.translation) <= 0.0) return false;
  // Standoff window along the approach ray.
  const auto hit = ray_hit(obj, g.translation, approach);
  if (!hit) return false;
  if (hit->t < params.standoff_min || hit->t > params.standoff_max) return false;
  // Approach vs. inward surface normal at the hit.
  const Vec3 inward = -hit->normal;
  if (approach.dot(inward) < std::cos(params.approach_tolerance)) return false;
  // Grip aperture vs. object width along the closing direction.
  const double width = support_width(obj, g.closing_axis());
  if (std::abs(params.hand.aperture(g.joints) - width) >
      params.width_tolerance)
    return false;
  // No approaches from below the support.
  if (approach.dot(obj.up()) > params.support_max_updot) return false;
  return true;
}

PointCloud sample_partial_view(const ToyObject& obj, const Vec3& camera_dir,
                               int points, std::uint64_t seed) {
  require(points >= 64, Errc::config, "partial view needs >= 64 samples");
  const Vec3 dir = camera_dir.normalized();
  Rng rng = Rng::derive(seed, 0x76696577ull);
  PointCloud out;
  for (int i = 0; i < points; ++i) {
    const SurfaceSample s = sample_surface_point(obj, rng);
    if (s.normal.dot(dir) < 0.0) out.points.push_back(s.point);
  }
  require(!out.points.empty(), Errc::empty_result,
          "view direction culls every surface sample");
  return out;
}

std::vector<Grasp> heuristic_plan_grasps(const ToyObject& obj, int count,
                                         std::uint64_t seed,
                                         const LabelParams& params,
                                         PlannerSpread spread) {
  require(count >= 1, Errc::config, "grasp count must be >= 1");
  Rng rng = Rng::derive(seed, 0x706c616eull);
  const HandModel& hand = params.hand;
  std::vector<Grasp> out;
  out.reserve(static_cast<std::size_t>(count));
  const long max_attempts = 300L * count + 1000L;
  const bool nominal = spread == PlannerSpread::nominal;
  for (long attempt = 0;
       attempt < max_attempts && static_cast<int>(out.size()) < count;
       ++attempt) {
    const SurfaceSample s = sample_surface_point(obj, rng);
    const Vec3 approach = -s.normal;
    const Vec3 u = any_perpendicular(approach);
    const double roll = rng.uniform(0.0, 2.0 * M_PI);
    const Vec3 closing =
        std::cos(roll) * u + std::sin(roll) * approach.cross(u);
    const double width = support_width(obj, closing);
    double standoff;
    Joints joints;
    if (nominal) {
      if (width > hand.max_aperture - params.width_tolerance) continue;
      standoff = rng.uniform(params.standoff_min + 0.005,
                             params.standoff_max - 0.005);
      joints = hand.preshape_for_width(width);
    } else {
      standoff = rng.uniform(0.004, params.standoff_max + 0.05);
      joints = hand.preshape_for_width(width);
      for (int i = 0; i < kJointCount; ++i) {
        joints[i] = std::min(std::max(joints[i] + rng.uniform(-0.2, 0.2), 0.0),
                             hand.joint_max);
      }
    }
    Grasp g;
    g.rotation.col(0) = closing;
    g.rotation.col(1) = approach.cross(closing);
    g.rotation.col(2) = approach;
    g.translation = s.point - standoff * approach;
    g.joints = joints;
    out.push_back(std::move(g));
  }
  if (static_cast<int>(out.size()) < count) {
    fail(Errc::no_grasp_found,
         std::string(shape_name(obj.shape)) + " object " +
             std::to_string(obj.id) +
             " admits too few grasp candidates (widths likely exceed the "
             "hand aperture)");
  }
  return out;
}

std::string DatasetConfig::canonical_string() const {
  std::ostringstream os;
  os << "objects=" << objects << ";views=" << views_per_object
     << ";grasps=" << grasps_per_label << ";view_points=" << view_points
     << ";surface_points=" << surface_points << ";bps=" << bps_size
     << ";bps_seed=" << bps_seed << ";master_seed=" << master_seed
     << ";scale=" << cloud_scale << ";train=" << train_fraction
     << ";val=" << val_fraction << ";ransac_thr=" << ransac_threshold
     << ";ransac_it=" << ransac_iterations << ";table=" << table_points
     << ";d_min=" << label.standoff_min << ";d_max=" << label.standoff_max
     << ";tau=" << label.approach_tolerance
     << ";w_tol=" << label.width_tolerance
     << ";updot=" << label.support_max_updot
     << ";aperture=" << label.hand.max_aperture;
  return os.str();
}

std::uint64_t DatasetConfig::config_hash() const {
  return fnv1a_hash(canonical_string());
}

namespace {

ToyObject make_object(const DatasetConfig& cfg, int object_index) {
  Rng rng = Rng::derive(cfg.master_seed, 0x0b1ec70000ull + object_index);
  ToyObject obj;
  obj.id = object_index;
  const double kind = rng.uniform();
  const double graspable_hi =
      cfg.label.hand.max_aperture - cfg.label.width_tolerance - 0.01;
  if (kind < 0.5) {
    obj.shape = ShapeKind::box;
    obj.dims = Vec3(rng.uniform(0.03, graspable_hi), rng.uniform(0.04, 0.20),
                    rng.uniform(0.05, 0.20));
  } else if (kind < 0.8) {
    obj.shape = ShapeKind::cylinder;
    const double d = rng.uniform(0.03, graspable_hi);
    obj.dims = Vec3(d, d, rng.uniform(0.06, 0.20));
  } else {
    obj.shape = ShapeKind::sphere;
    const double d = rng.uniform(0.04, graspable_hi);
    obj.dims = Vec3(d, d, d);
  }
  return obj;
}

PointCloud make_table_patch(const Vec3& center_xy, int points, Rng& rng) {
  PointCloud out;
  out.points.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double rad = 0.22 * std::sqrt(rng.uniform());
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    out.points.emplace_back(center_xy.x() + rad * std::cos(theta),
                            center_xy.y() + rad * std::sin(theta), 0.0);
  }
  return out;
}

Grasp to_centroid_frame(const Grasp& world, const Vec3& centroid) {
  Grasp g = world;
  g.translation -= centroid;
  return g;
}

Grasp perturb_until_negative(const ToyObject& obj, const Grasp& positive_world,
                             const LabelParams& label, Rng& rng, bool rotate) {
  double sigma_t = 0.03;
  double sigma_r = 30.0 * M_PI / 180.0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    Grasp g = positive_world;
    if (rotate) {
      Vec3 axis(rng.normal(), rng.normal(), rng.normal());
      while (axis.norm() < 1e-9) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
      const double angle = std::abs(rng.normal()) * sigma_r;
      g.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix() *
                   g.rotation;
    } else {
      g.translation += Vec3(rng.normal(), rng.normal(), rng.normal()) * sigma_t;
    }
    if (!label_grasp(obj, g, label)) return g;
    // Widen until the label flips.
    sigma_t *= 1.4;
    sigma_r = std::min(sigma_r * 1.4, M_PI);
  }
  fail(Errc::generation, "could not perturb a positive into a negative");
}

}  // namespace

SceneRecord build_scene(const DatasetConfig& cfg, const BpsBasis& basis,
                        int scene_index) {
  const int object_index = scene_index / cfg.views_per_object;
  ToyObject obj = make_object(cfg, object_index);

  Rng rng = Rng::derive(cfg.master_seed, 0x5ce9e0000ull + scene_index);
  // Resting pose: yaw about z, bottom on the z = 0 plane.
  const double yaw = rng.uniform(0.0, 2.0 * M_PI);
  obj.pose_r = rot_z(yaw);
  const double rest =
      obj.shape == ShapeKind::sphere ? obj.dims.x() / 2.0 : obj.dims.z() / 2.0;
  obj.pose_t = Vec3(rng.uniform(-0.06, 0.06), rng.uniform(-0.06, 0.06), rest);

  // Camera looking down at the scene from a random side.
  const double polar = rng.uniform(25.0, 65.0) * M_PI / 180.0;
  const double azimuth = rng.uniform(0.0, 2.0 * M_PI);
  const Vec3 camera_dir(std::sin(polar) * std::cos(azimuth),
                        std::sin(polar) * std::sin(azimuth), -std::cos(polar));

  const std::uint64_t view_seed = rng.next_u64();
  PointCloud view =
      sample_partial_view(obj, camera_dir, cfg.view_points, view_seed);
  Rng table_rng = Rng::derive(cfg.master_seed, 0x7ab1e0000ull + scene_index);
  const PointCloud table = make_table_patch(obj.pose_t, cfg.table_points, table_rng);
  PointCloud combined;
  combined.points = view.points;
  combined.points.insert(combined.points.end(), table.points.begin(),
                         table.points.end());
  const std::uint64_t ransac_seed = rng.next_u64();
  PointCloud object_cloud = ransac_remove_plane(
      combined, cfg.ransac_threshold, cfg.ransac_iterations, ransac_seed);

  SceneRecord scene;
  scene.scene_index = scene_index;
  scene.object = obj;
  scene.view_cloud = object_cloud;
  scene.bps = encode_scene_cloud(object_cloud, basis, cfg.cloud_scale);

  const Vec3 centroid = scene.bps.centroid_offset;
  const int P = cfg.grasps_per_label;

  // Positives: nominal planner candidates that pass the oracle.
  std::vector<Grasp> positives_world;
  std::vector<Grasp> rejects_world;
  const std::uint64_t plan_seed = rng.next_u64();
  for (int round = 0; round < 6 && static_cast<int>(positives_world.size()) < P;
       ++round) {
    const auto candidates = heuristic_plan_grasps(
        obj, 4 * P, plan_seed + static_cast<std::uint64_t>(round), cfg.label,
        PlannerSpread::nominal);
    for (const auto& g : candidates) {
      if (static_cast<int>(positives_world.size()) >= P &&
          static_cast<int>(rejects_world.size()) >= P)
        break;
      if (label_grasp(obj, g, cfg.label)) {
        if (static_cast<int>(positives_world.size()) >= P) continue;
        bool distinct = true;
        for (const auto& p : positives_world) {
          if ((p.translation - g.translation).norm() <= 1e-6) {
            distinct = false;
            break;
          }
        }
        if (distinct) positives_world.push_back(g);
      } else if (static_cast<int>(rejects_world.size()) < P) {
        rejects_world.push_back(g);
      }
    }
  }
  require(static_cast<int>(positives_world.size()) >= P, Errc::generation,
          "object " + std::to_string(obj.id) + " (" + shape_name(obj.shape) +
              "): positive grasp quota unreachable");

  // Negatives: half perturbed positives, half planner rejects.
  const int n_perturbed = P / 2;
  const int n_rejects = P - n_perturbed;
  Rng neg_rng = Rng::derive(cfg.master_seed, 0x4e360000ull + scene_index);
  std::vector<Grasp> negatives_world;
  for (int i = 0; i < n_perturbed; ++i) {
    const Grasp& base = positives_world[static_cast<std::size_t>(i) %
                                        positives_world.size()];
    negatives_world.push_back(
        perturb_until_negative(obj, base, cfg.label, neg_rng, i % 2 == 1));
  }
  const std::uint64_t explore_seed = rng.next_u64();
  for (int round = 0;
       round < 6 && static_cast<int>(rejects_world.size()) < n_rejects;
       ++round) {
    const auto extra = heuristic_plan_grasps(
        obj, 2 * P, explore_seed + static_cast<std::uint64_t>(round),
        cfg.label, PlannerSpread::exploratory);
    for (const auto& g : extra) {
      if (static_cast<int>(rejects_world.size()) >= n_rejects) break;
      if (!label_grasp(obj, g, cfg.label)) rejects_world.push_back(g);
    }
  }
  require(static_cast<int>(rejects_world.size()) >= n_rejects, Errc::generation,
          "object " + std::to_string(obj.id) +
              ": negative (reject) quota unreachable");
  for (int i = 0; i < n_rejects; ++i)
    negatives_world.push_back(rejects_world[static_cast<std::size_t>(i)]);

  scene.positives.reserve(positives_world.size());
  for (const auto& g : positives_world)
    scene.positives.push_back(to_centroid_frame(g, centroid));
  scene.negatives.reserve(negatives_world.size());
  for (const auto& g : negatives_world)
    scene.negatives.push_back(to_centroid_frame(g, centroid));

  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03d", scene_index);
  scene.name = buf;
  return scene;
}

namespace {

nlohmann::json object_to_json(const ToyObject& obj) {
  nlohmann::json j;
  j["shape"] = shape_name(obj.shape);
  j["dims"] = {obj.dims.x(), obj.dims.y(), obj.dims.z()};
  std::vector<double> r(9);
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) r[3 * row + col] = obj.pose_r(row, col);
  j["pose_r"] = r;
  j["pose_t"] = {obj.pose_t.x(), obj.pose_t.y(), obj.pose_t.z()};
  j["id"] = obj.id;
  return j;
}

ToyObject object_from_json(const nlohmann::json& j) {
  ToyObject obj;
  obj.shape = shape_from_name(j.at("shape").get<std::string>());
  for (int i = 0; i < 3; ++i) obj.dims[i] = j.at("dims")[i].get<double>();
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col)
      obj.pose_r(row, col) = j.at("pose_r")[3 * row + col].get<double>();
  for (int i = 0; i < 3; ++i) obj.pose_t[i] = j.at("pose_t")[i].get<double>();
  obj.id = j.at("id").get<int>();
  return obj;
}

nlohmann::json config_to_json(const DatasetConfig& cfg) {
  nlohmann::json j;
  j["objects"] = cfg.objects;
  j["views_per_object"] = cfg.views_per_object;
  j["grasps_per_label"] = cfg.grasps_per_label;
  j["view_points"] = cfg.view_points;
  j["surface_points"] = cfg.surface_points;
  j["bps_size"] = cfg.bps_size;
  j["bps_seed"] = cfg.bps_seed;
  j["master_seed"] = cfg.master_seed;
  j["cloud_scale"] = cfg.cloud_scale;
  j["train_fraction"] = cfg.train_fraction;
  j["val_fraction"] = cfg.val_fraction;
  j["ransac_threshold"] = cfg.ransac_threshold;
  j["ransac_iterations"] = cfg.ransac_iterations;
  j["table_points"] = cfg.table_points;
  return j;
}

DatasetConfig config_from_json(const nlohmann::json& j) {
  DatasetConfig cfg;
  cfg.objects = j.at("objects").get<int>();
  cfg.views_per_object = j.at("views_per_object").get<int>();
  cfg.grasps_per_label = j.at("grasps_per_label").get<int>();
  cfg.view_points = j.at("view_points").get<int>();
  cfg.surface_points = j.at("surface_points").get<int>();
  cfg.bps_size = j.at("bps_size").get<int>();
  cfg.bps_seed = j.at("bps_seed").get<std::uint64_t>();
  cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  cfg.cloud_scale = j.at("cloud_scale").get<double>();
  cfg.train_fraction = j.at("train_fraction").get<double>();
  cfg.val_fraction = j.at("val_fraction").get<double>();
  cfg.ransac_threshold = j.at("ransac_threshold").get<double>();
  cfg.ransac_iterations = j.at("ransac_iterations").get<int>();
  cfg.table_points = j.at("table_points").get<int>();
  return cfg;
}

}  // namespace

void write_scene(const std::filesystem::path& dataset_dir,
                 const SceneRecord& scene, double cloud_scale) {
  namespace fs = std::filesystem;
  const fs::path dir = dataset_dir / scene.name;
  fs::create_directories(dir);
  write_ply(dir / "cloud.ply", scene.view_cloud);
  write_bps_f32(dir / "bps.f32", scene.bps);

  std::ofstream grasps(dir / "grasps.jsonl", std::ios::trunc);
  require(grasps.good(), Errc::io, "cannot write grasps.jsonl");
  for (const auto& g : scene.positives) {
    nlohmann::json j = grasp_to_json(g);
    j["label"] = 1;
    grasps << j.dump() << "\n";
  }
  for (const auto& g : scene.negatives) {
    nlohmann::json j = grasp_to_json(g);
    j["label"] = 0;
    grasps << j.dump() << "\n";
  }

  nlohmann::json meta;
  meta["name"] = scene.name;
  meta["scene_index"] = scene.scene_index;
  meta["object"] = object_to_json(scene.object);
  meta["centroid"] = {scene.bps.centroid_offset.x(),
                      scene.bps.centroid_offset.y(),
                      scene.bps.centroid_offset.z()};
  meta["scale"] = cloud_scale;
  std::ofstream meta_os(dir / "scene.json", std::ios::trunc);
  meta_os << meta.dump(2) << "\n";
  require(meta_os.good(), Errc::io, "cannot write scene.json");
}

void write_manifest(const std::filesystem::path& dataset_dir,
                    const DatasetManifest& manifest) {
  nlohmann::json j;
  j["version"] = "0.1.0";
  j["config"] = config_to_json(manifest.config);
  j["config_hash"] = manifest.config.config_hash();
  j["scenes"] = manifest.scene_names;
  j["splits"]["train"] = manifest.train_scenes;
  j["splits"]["val"] = manifest.val_scenes;
  j["splits"]["test"] = manifest.test_scenes;
  std::ofstream os(dataset_dir / "manifest.json", std::ios::trunc);
  os << j.dump(2) << "\n";
  require(os.good(), Errc::io, "cannot write manifest.json");
}

DatasetManifest build_dataset(const DatasetConfig& cfg,
                              const std::filesystem::path& out_dir,
                              int threads) {
  require(cfg.objects >= 3, Errc::config,
          "need at least 3 objects to form train/val/test splits");
  require(cfg.views_per_object >= 1 && cfg.grasps_per_label >= 1, Errc::config,
          "views and grasp counts must be positive");
  std::filesystem::create_directories(out_dir);

  const BpsBasis basis = BpsBasis::generate(cfg.bps_size, cfg.bps_seed);
  const int n_scenes = cfg.objects * cfg.views_per_object;
  std::vector<SceneRecord> scenes(static_cast<std::size_t>(n_scenes));

  const int workers = std::max(1, threads);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      try {
        scenes[static_cast<std::size_t>(i)] = build_scene(cfg, basis, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    work(0, n_scenes);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n_scenes + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(n_scenes, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  DatasetManifest manifest;
  manifest.config = cfg;
  for (const auto& s : scenes) {
    write_scene(out_dir, s, cfg.cloud_scale);
    manifest.scene_names.push_back(s.name);
  }

  // Split by object id so test objects are unseen.
  std::vector<int> object_ids(static_cast<std::size_t>(cfg.objects));
  std::iota(object_ids.begin(), object_ids.end(), 0);
  Rng split_rng = Rng::derive(cfg.master_seed, 0x73706c69ull);
  for (std::size_t i = object_ids.size(); i > 1; --i)
    std::swap(object_ids[i - 1], object_ids[split_rng.uniform_int(i)]);
  const int n_train = std::max(
      1, static_cast<int>(std::round(cfg.train_fraction * cfg.objects)));
  const int n_val = std::max(
      1, static_cast<int>(std::round(cfg.val_fraction * cfg.objects)));
  require(n_train + n_val < cfg.objects, Errc::config,
          "split fractions leave no test objects");
  for (int i = 0; i < cfg.objects; ++i) {
    const int obj = object_ids[static_cast<std::size_t>(i)];
    auto& bucket = i < n_train            ? manifest.train_scenes
                   : i < n_train + n_val  ? manifest.val_scenes
                                          : manifest.test_scenes;
    for (int v = 0; v < cfg.views_per_object; ++v)
      bucket.push_back(obj * cfg.views_per_object + v);
  }
  std::sort(manifest.train_scenes.begin(), manifest.train_scenes.end());
  std::sort(manifest.val_scenes.begin(), manifest.val_scenes.end());
  std::sort(manifest.test_scenes.begin(), manifest.test_scenes.end());

  write_manifest(out_dir, manifest);
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir) {
  std::ifstream is(dataset_dir / "manifest.json");
  require(is.good(), Errc::io,
          "cannot open manifest.json under '" + dataset_dir.string() + "'");
  DatasetManifest m;
  try {
    nlohmann::json j;
    is >> j;
    m.config = config_from_json(j.at("config"));
    m.scene_names = j.at("scenes").get<std::vector<std::string>>();
    m.train_scenes = j.at("splits").at("train").get<std::vector<int>>();
    m.val_scenes = j.at("splits").at("val").get<std::vector<int>>();
    m.test_scenes = j.at("splits").at("test").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io, "malformed dataset manifest under '" + dataset_dir.string() +
                       "': " + e.what());
  }
  return m;
}

LoadedScene load_scene(const std::filesystem::path& scene_dir) {
  LoadedScene s;
  std::ifstream meta_is(scene_dir / "scene.json");
  require(meta_is.good(), Errc::io,
          "cannot open scene.json under '" + scene_dir.string() + "'");
  nlohmann::json meta;
  meta_is >> meta;
  s.name = meta.at("name").get<std::string>();
  for (int i = 0; i < 3; ++i) s.centroid[i] = meta.at("centroid")[i].get<double>();
  s.scale = meta.at("scale").get<double>();
  if (meta.contains("object")) s.object = object_from_json(meta.at("object"));
  if (meta.contains("parts")) {
    for (auto& [part, idx] : meta.at("parts").items())
      s.parts[part] = idx.get<std::vector<int>>();
  }
  s.cloud = read_ply(scene_dir / "cloud.ply");
  s.bps = read_bps_f32(scene_dir / "bps.f32");

  std::ifstream grasps(scene_dir / "grasps.jsonl");
  if (grasps.good()) {
    std::string line;
    while (std::getline(grasps, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      LabeledGrasp lg;
      lg.grasp = grasp_from_json(j);
      lg.positive = j.at("label").get<int>() == 1;
      s.grasps.push_back(std::move(lg));
    }
  }
  return s;
}

CompositeScene build_hammer_cloud(int points_per_part, std::uint64_t seed) {
  require(points_per_part >= 32, Errc::config, "hammer needs >= 32 points per part");
  ToyObject handle;
  handle.shape = ShapeKind::box;
  handle.dims = Vec3(0.03, 0.03, 0.16);
  handle.pose_t = Vec3(0, 0, 0.08);
  ToyObject head;
  head.shape = ShapeKind::box;
  head.dims = Vec3(0.14, 0.045, 0.05);
  head.pose_t = Vec3(0, 0, 0.185);

  const Vec3 camera_dir = Vec3(0.5, 0.35, -0.8).normalized();
  CompositeScene out;
  const PointCloud handle_view =
      sample_partial_view(handle, camera_dir, points_per_part, seed);
  const PointCloud head_view =
      sample_partial_view(head, camera_dir, points_per_part, seed + 1);
  for (const auto& p : handle_view.points) {
    out.cloud.points.push_back(p);
    out.handle_mask.push_back(1);
    out.head_mask.push_back(0);
  }
  for (const auto& p : head_view.points) {
    out.cloud.points.push_back(p);
    out.handle_mask.push_back(0);
    out.head_mask.push_back(1);
  }
  return out;
}

void write_hammer_scene(const std::filesystem::path& scene_dir,
                        const BpsBasis& basis, std::uint64_t seed,
                        double cloud_scale) {
  namespace fs = std::filesystem;
  fs::create_directories(scene_dir);
  const CompositeScene composite = build_hammer_cloud(700, seed);
  const BpsFeature bps = encode_scene_cloud(composite.cloud, basis, cloud_scale);
  write_ply(scene_dir / "cloud.ply", composite.cloud);
  write_bps_f32(scene_dir / "bps.f32", bps);

  nlohmann::json meta;
  meta["name"] = "hammer";
  meta["centroid"] = {bps.centroid_offset.x(), bps.centroid_offset.y(),
                      bps.centroid_offset.z()};
  meta["scale"] = cloud_scale;
  std::vector<int> handle_idx, head_idx;
  for (std::size_t i = 0; i < composite.cloud.size(); ++i) {
    if (composite.handle_mask[i]) handle_idx.push_back(static_cast<int>(i));
    if (composite.head_mask[i]) head_idx.push_back(static_cast<int>(i));
  }
  meta["parts"]["handle"] = handle_idx;
  meta["parts"]["head"] = head_idx;
  std::ofstream os(scene_dir / "scene.json", std::ios::trunc);
  os << meta.dump(2) << "\n";
  require(os.good(), Errc::io, "cannot write hammer scene.json");
}

}  // namespace dexgrasp
