#include "dexgrasp/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace dexgrasp {

namespace {

int nearest_by_translation(const Grasp& g, const std::vector<Grasp>& gt) {
  int best = 0;
  double best_d = (g.translation - gt[0].translation).squaredNorm();
  for (std::size_t i = 1; i < gt.size(); ++i) {
    const double d = (g.translation - gt[i].translation).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

MagdReport magd(const std::vector<Grasp>& gen, const std::vector<Grasp>& gt) {
  require(!gen.empty() && !gt.empty(), Errc::empty_batch,
          "magd needs non-empty grasp sets");
  MagdReport r;
  r.matched.reserve(gen.size());
  r.d_transl.reserve(gen.size());
  r.d_rot.reserve(gen.size());
  r.d_joint.reserve(gen.size());
  for (const auto& g : gen) {
    const int k = nearest_by_translation(g, gt);
    const Grasp& m = gt[static_cast<std::size_t>(k)];
    r.matched.push_back(k);
    r.d_transl.push_back((g.translation - m.translation).norm());
    r.d_rot.push_back(geodesic_distance(g.rotation, m.rotation));
    r.d_joint.push_back((g.joints - m.joints).norm());
  }
  const double n = static_cast<double>(gen.size());
  for (std::size_t i = 0; i < gen.size(); ++i) {
    r.cum_transl += r.d_transl[i];
    r.cum_rot += r.d_rot[i];
    r.cum_joint += r.d_joint[i];
  }
  r.mean_transl = r.cum_transl / n;
  r.mean_rot = r.cum_rot / n;
  r.mean_joint = r.cum_joint / n;
  return r;
}

CoverageReport coverage(const std::vector<Grasp>& gen,
                        const std::vector<Grasp>& gt) {
  require(!gen.empty() && !gt.empty(), Errc::empty_batch,
          "coverage needs non-empty grasp sets");
  std::set<int> matched;
  for (const auto& g : gen) matched.insert(nearest_by_translation(g, gt));
  CoverageReport r;
  r.matched_gt.assign(matched.begin(), matched.end());
  r.cov = static_cast<double>(matched.size()) / static_cast<double>(gt.size());
  return r;
}

std::vector<Grasp> sample_grasps(const Network& generator,
                                 const std::vector<double>& bps, int n,
                                 std::uint64_t seed, double workspace_radius) {
  require(n >= 1, Errc::config, "sample count must be >= 1");
  const auto bps_dim = static_cast<Eigen::Index>(bps.size());
  const int latent = generator.config().input_dim - static_cast<int>(bps_dim);
  require(latent >= 1, Errc::shape_mismatch,
          "BPS dimension does not match the generator input layer");
  Rng rng = Rng::derive(seed, 0x73616d70ull);
  Mat input(n, bps_dim + latent);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < bps_dim; ++c)
      input(r, c) = bps[static_cast<std::size_t>(c)];
    for (int c = 0; c < latent; ++c) input(r, bps_dim + c) = rng.normal();
  }
  const auto heads = generator.forward_values(input);
  const Mat& t = heads.at("translation");
  const Mat& r6 = heads.at("rotation6d");
  const Mat& j = heads.at("joints");
  const JointLimits limits = JointLimits::defaults();

  std::vector<Grasp> out;
  out.reserve(static_cast<std::size_t>(n));
  Tape tape;
  const Var j_scaled = scale_joints_to_limits(tape, tape.leaf(j), limits);
  const Mat& js = j_scaled.value();
  for (int r = 0; r < n; ++r) {
    out.push_back(decode_generator_row(t.row(r), r6.row(r), js.row(r), limits,
                                       workspace_radius));
  }
  return out;
}

std::vector<MetricsRow> metrics_batch(const Network& generator,
                                      const std::vector<LoadedScene>& scenes,
                                      const std::vector<int>& scene_indices,
                                      int samples_per_scene,
                                      std::uint64_t seed) {
  require(!scene_indices.empty(), Errc::empty_batch,
          "metrics over an empty split");
  std::vector<MetricsRow> rows;
  rows.reserve(scene_indices.size());
  for (std::size_t i = 0; i < scene_indices.size(); ++i) {
    const auto& scene = scenes[static_cast<std::size_t>(i)];
    std::vector<Grasp> gt;
    for (const auto& lg : scene.grasps)
      if (lg.positive) gt.push_back(lg.grasp);
    require(!gt.empty(), Errc::empty_batch,
            "scene '" + scene.name + "' has no positive grasps");
    const auto gen = sample_grasps(generator, scene.bps, samples_per_scene,
                                   mix_seed(seed, scene_indices[i]));
    const MagdReport m = magd(gen, gt);
    const CoverageReport c = coverage(gen, gt);
    MetricsRow row;
    row.scene_index = scene_indices[i];
    row.n_gen = static_cast<int>(gen.size());
    row.n_gt = static_cast<int>(gt.size());
    row.magd_t_cum = m.cum_transl;
    row.magd_r_cum = m.cum_rot;
    row.magd_j_cum = m.cum_joint;
    row.magd_t_mean = m.mean_transl;
    row.magd_r_mean = m.mean_rot;
    row.magd_j_mean = m.mean_joint;
    row.cov = c.cov;
    rows.push_back(row);
  }
  return rows;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRow>& rows) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  require(f != nullptr, Errc::io, "cannot open '" + path.string() + "'");
  std::fprintf(f,
               "scene_id,n_gen,n_gt,magd_t_cum,magd_r_cum,magd_j_cum,"
               "magd_t_mean,magd_r_mean,magd_j_mean,cov\n");
  for (const auto& r : rows) {
    std::fprintf(f, "%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                 r.scene_index, r.n_gen, r.n_gt, r.magd_t_cum, r.magd_r_cum,
                 r.magd_j_cum, r.magd_t_mean, r.magd_r_mean, r.magd_j_mean,
                 r.cov);
  }
  std::fclose(f);
}

MetricsSummary summarize_metrics(const std::vector<MetricsRow>& rows) {
  require(!rows.empty(), Errc::empty_batch, "no metric rows to summarize");
  MetricsSummary s;
  for (const auto& r : rows) {
    s.mean_cov += r.cov;
    s.magd_t_cum += r.magd_t_cum;
    s.magd_r_cum += r.magd_r_cum;
    s.magd_j_cum += r.magd_j_cum;
    s.magd_t_mean += r.magd_t_mean;
    s.magd_r_mean += r.magd_r_mean;
    s.magd_j_mean += r.magd_j_mean;
  }
  const double n = static_cast<double>(rows.size());
  s.mean_cov /= n;
  s.magd_t_mean /= n;
  s.magd_r_mean /= n;
  s.magd_j_mean /= n;
  return s;
}

}  // namespace dexgrasp
