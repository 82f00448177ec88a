#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dexgrasp/checkpoint.hpp"
#include "dexgrasp/cli.hpp"
#include "dexgrasp/dataset.hpp"
#include "dexgrasp/evaluator.hpp"
#include "dexgrasp/gan.hpp"
#include "dexgrasp/metrics.hpp"
#include "dexgrasp/pipeline.hpp"

namespace py = pybind11;
using namespace dexgrasp;

namespace {

Mat3 mat3_from_list(const std::vector<double>& r) {
  if (r.size() != 9) throw Error(Errc::shape_mismatch, "rotation needs 9 entries");
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = r[static_cast<std::size_t>(3 * i + j)];
  return m;
}

std::vector<double> mat3_to_list(const Mat3& m) {
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[static_cast<std::size_t>(3 * i + j)] = m(i, j);
  return r;
}

PointCloud cloud_from_list(const std::vector<std::array<double, 3>>& pts) {
  PointCloud c;
  c.points.reserve(pts.size());
  for (const auto& p : pts) c.points.emplace_back(p[0], p[1], p[2]);
  return c;
}

std::vector<std::array<double, 3>> cloud_to_list(const PointCloud& c) {
  std::vector<std::array<double, 3>> out;
  out.reserve(c.size());
  for (const auto& p : c.points) out.push_back({p.x(), p.y(), p.z()});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dexterous grasp synthesis core (cGAN generator, stability "
            "evaluator, BPS encoding, grasp-set metrics, task pipeline)";

  py::register_exception<Error>(m, "DexError");

  py::class_<Grasp>(m, "Grasp")
      .def(py::init<>())
      .def_property(
          "rotation", [](const Grasp& g) { return mat3_to_list(g.rotation); },
          [](Grasp& g, const std::vector<double>& r) { g.rotation = mat3_from_list(r); })
      .def_property(
          "translation",
          [](const Grasp& g) {
            return std::vector<double>{g.translation.x(), g.translation.y(),
                                       g.translation.z()};
          },
          [](Grasp& g, const std::vector<double>& t) {
            if (t.size() != 3) throw Error(Errc::shape_mismatch, "t needs 3");
            g.translation = Vec3(t[0], t[1], t[2]);
          })
      .def_property(
          "joints",
          [](const Grasp& g) {
            return std::vector<double>(g.joints.data(), g.joints.data() + 12);
          },
          [](Grasp& g, const std::vector<double>& j) {
            if (j.size() != 12) throw Error(Errc::shape_mismatch, "j needs 12");
            for (int i = 0; i < 12; ++i) g.joints[i] = j[static_cast<std::size_t>(i)];
          })
      .def("to_json", [](const Grasp& g) { return grasp_to_json(g).dump(); })
      .def_static("from_json", [](const std::string& s) {
        return grasp_from_json(nlohmann::json::parse(s));
      });

  m.def("geodesic_distance",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          return geodesic_distance(mat3_from_list(a), mat3_from_list(b));
        },
        py::arg("a"), py::arg("b"));

  m.def("rotation6d_to_rotation", [](const std::vector<double>& r6) {
    if (r6.size() != 6) throw Error(Errc::shape_mismatch, "need 6 entries");
    Rotation6D r{Vec3(r6[0], r6[1], r6[2]), Vec3(r6[3], r6[4], r6[5])};
    return mat3_to_list(rotation6d_to_rotation(r));
  });

  m.def("grasp_translation_distance", &grasp_translation_distance);
  m.def("joint_distance", &joint_distance);

  m.def("bps_encode",
        [](const std::vector<std::array<double, 3>>& cloud, int basis_size,
           std::uint64_t seed) {
          const BpsBasis basis = BpsBasis::generate(basis_size, seed);
          return bps_encode(cloud_from_list(cloud), basis).distances;
        },
        py::arg("cloud"), py::arg("basis_size") = 1024, py::arg("seed") = 42);

  m.def("encode_scene_cloud",
        [](const std::vector<std::array<double, 3>>& cloud, int basis_size,
           std::uint64_t seed, double scale) {
          const BpsBasis basis = BpsBasis::generate(basis_size, seed);
          const BpsFeature f =
              encode_scene_cloud(cloud_from_list(cloud), basis, scale);
          py::dict out;
          out["distances"] = f.distances;
          out["centroid"] = std::vector<double>{
              f.centroid_offset.x(), f.centroid_offset.y(), f.centroid_offset.z()};
          out["scale"] = f.scale;
          return out;
        },
        py::arg("cloud"), py::arg("basis_size") = 1024, py::arg("seed") = 42,
        py::arg("scale") = kDefaultCloudScale);

  m.def("ransac_remove_plane",
        [](const std::vector<std::array<double, 3>>& cloud, double threshold,
           int iterations, std::uint64_t seed) {
          return cloud_to_list(ransac_remove_plane(cloud_from_list(cloud),
                                                   threshold, iterations, seed));
        },
        py::arg("cloud"), py::arg("threshold"), py::arg("iterations") = 128,
        py::arg("seed") = 0);

  m.def("magd", [](const std::vector<Grasp>& gen, const std::vector<Grasp>& gt) {
    const MagdReport r = magd(gen, gt);
    py::dict out;
    out["matched"] = r.matched;
    out["d_transl"] = r.d_transl;
    out["d_rot"] = r.d_rot;
    out["d_joint"] = r.d_joint;
    out["cum"] = std::vector<double>{r.cum_transl, r.cum_rot, r.cum_joint};
    out["mean"] = std::vector<double>{r.mean_transl, r.mean_rot, r.mean_joint};
    return out;
  });

  m.def("coverage", [](const std::vector<Grasp>& gen, const std::vector<Grasp>& gt) {
    const CoverageReport r = coverage(gen, gt);
    py::dict out;
    out["matched_gt"] = r.matched_gt;
    out["cov"] = r.cov;
    return out;
  });

  m.def("knn_part_filter",
        [](const std::vector<Grasp>& grasps,
           const std::vector<std::array<double, 3>>& part, int k, double lambda) {
          const auto filtered =
              knn_part_filter(grasps, cloud_from_list(part), k, lambda);
          std::vector<std::pair<Grasp, double>> out(filtered.begin(),
                                                    filtered.end());
          return out;
        },
        py::arg("grasps"), py::arg("part"), py::arg("k") = 30,
        py::arg("lambda_") = 0.05);

  m.def("sample_grasps",
        [](const std::string& checkpoint, const std::string& scene_dir, int n,
           std::uint64_t seed) {
          const Network gen = load_checkpoint(checkpoint).net;
          const LoadedScene scene = load_scene(scene_dir);
          return sample_grasps(gen, scene.bps, n, seed);
        },
        py::arg("checkpoint"), py::arg("scene_dir"), py::arg("n") = 100,
        py::arg("seed") = 0);

  m.def("score_grasps",
        [](const std::string& checkpoint, const std::string& scene_dir,
           const std::vector<Grasp>& grasps) {
          const Network eval = load_checkpoint(checkpoint).net;
          const LoadedScene scene = load_scene(scene_dir);
          return score_grasps(eval, scene.bps, grasps);
        },
        py::arg("checkpoint"), py::arg("scene_dir"), py::arg("grasps"));

  m.def("run_afford_pipeline",
        [](const std::string& gen_ckpt, const std::string& eval_ckpt,
           const std::string& scene_dir, const std::string& affordance, int n,
           int k, std::uint64_t seed) {
          const Network gen = load_checkpoint(gen_ckpt).net;
          const Network eval = load_checkpoint(eval_ckpt).net;
          const LoadedScene scene = load_scene(scene_dir);
          MockAffordanceOracle oracle = MockAffordanceOracle::with_default_kb();
          AffordanceRequest req{affordance, scene.name, scene.cloud};
          PipelineConfig cfg;
          cfg.n_samples = n;
          cfg.knn_k = k;
          cfg.seed = seed;
          const PipelineResult result = run_afford_pipeline(
              req, oracle, gen, eval, scene.bps, scene.centroid, cfg);
          py::dict out;
          out["object_name"] = result.object_name;
          out["part_name"] = result.part_name;
          out["top_grasp"] = result.top.grasp;
          out["top_score"] = result.top.score;
          std::vector<std::string> stages;
          for (const auto& t : result.trace) stages.push_back(t.stage);
          out["stages"] = stages;
          return out;
        },
        py::arg("generator"), py::arg("evaluator"), py::arg("scene_dir"),
        py::arg("affordance"), py::arg("n") = 100, py::arg("k") = 30,
        py::arg("seed") = 0);

  m.def("cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("dexgrasp");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_dispatch(static_cast<int>(argv.size()), argv.data());
  });

  m.attr("__version__") = "0.1.0";
}
