#pragma once

#include <filesystem>
#include <vector>

#include "dexgrasp/evaluator.hpp"
#include "dexgrasp/gan.hpp"
#include "dexgrasp/geometry.hpp"

namespace dexgrasp {

/// Per-grasp nearest-match distances of a generated set against ground
/// truth. Matching uses translation only; rotation uses the geodesic angle.
struct MagdReport {
  std::vector<int> matched;       // ground-truth index per generated grasp
  std::vector<double> d_transl;   // meters
  std::vector<double> d_rot;      // radians, <= pi
  std::vector<double> d_joint;    // radians
  // Cumulative = sum of the per-grasp L2 distances; mean = their average.
  double cum_transl = 0.0, cum_rot = 0.0, cum_joint = 0.0;
  double mean_transl = 0.0, mean_rot = 0.0, mean_joint = 0.0;
};

struct CoverageReport {
  std::vector<int> matched_gt;  // distinct matched ground-truth indices, sorted
  double cov = 0.0;             // |matched| / |gt|
};

/// Ties in the nearest-translation match go to the lowest index.
MagdReport magd(const std::vector<Grasp>& gen, const std::vector<Grasp>& gt);
CoverageReport coverage(const std::vector<Grasp>& gen,
                        const std::vector<Grasp>& gt);

struct MetricsRow {
  int scene_index = 0;
  int n_gen = 0;
  int n_gt = 0;
  double magd_t_cum = 0.0, magd_r_cum = 0.0, magd_j_cum = 0.0;
  double magd_t_mean = 0.0, magd_r_mean = 0.0, magd_j_mean = 0.0;
  double cov = 0.0;
};

/// Samples `samples_per_scene` grasps per scene from the generator (no
/// evaluator filtering) and reports MAGD/Coverage against each scene's
/// positive set. Deterministic given seed.
std::vector<MetricsRow> metrics_batch(const Network& generator,
                                      const std::vector<LoadedScene>& scenes,
                                      const std::vector<int>& scene_indices,
                                      int samples_per_scene,
                                      std::uint64_t seed);

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRow>& rows);

struct MetricsSummary {
  double mean_cov = 0.0;
  double magd_t_cum = 0.0, magd_r_cum = 0.0, magd_j_cum = 0.0;
  double magd_t_mean = 0.0, magd_r_mean = 0.0, magd_j_mean = 0.0;
};
MetricsSummary summarize_metrics(const std::vector<MetricsRow>& rows);

/// Latent sampling + decode: n grasps in the object-centroid frame.
std::vector<Grasp> sample_grasps(const Network& generator,
                                 const std::vector<double>& bps, int n,
                                 std::uint64_t seed,
                                 double workspace_radius = 1.0);

}  // namespace dexgrasp
