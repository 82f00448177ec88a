#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dexgrasp/cli.hpp"
#include "dexgrasp/config.hpp"
#include "dexgrasp/errors.hpp"

using namespace dexgrasp;

namespace {

namespace fs = std::filesystem;

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("dexgrasp");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return std::string((std::istreambuf_iterator<char>(is)), {});
}

int count_lines(const fs::path& p) {
  std::ifstream is(p);
  REQUIRE(is.good());
  int n = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++n;
  return n;
}

// A tiny dataset + run shared by the CLI flow tests.
struct CliWorkspace {
  fs::path root;
  fs::path data;
  fs::path gan_run;
  fs::path eval_run;

  CliWorkspace() {
    root = fs::temp_directory_path() / "dexgrasp_cli_ws";
    fs::remove_all(root);
    fs::create_directories(root);
    data = root / "data";
    gan_run = root / "runs" / "g1";
    eval_run = root / "runs" / "e1";

    const fs::path cfg = root / "toy.cfg";
    std::ofstream os(cfg);
    os << "# tiny dataset for CLI tests\n"
       << "objects = 4\n"
       << "views_per_object = 1\n"
       << "grasps_per_label = 16\n"
       << "view_points = 384\n"
       << "bps_size = 48\n"
       << "master_seed = 13\n"
       << "train_fraction = 0.5\n"
       << "val_fraction = 0.25\n";
    os.close();

    REQUIRE(run_cli({"gen-data", "--config", cfg.string(), "--out",
                     data.string()}) == 0);
    REQUIRE(run_cli({"train-gan", "--data", data.string(), "--out",
                     gan_run.string(), "--epochs", "2", "--width", "24",
                     "--blocks", "1", "--latent_dim", "4", "--seed", "3"}) == 0);
    REQUIRE(run_cli({"train-eval", "--data", data.string(), "--out",
                     eval_run.string(), "--epochs", "2", "--batch", "32",
                     "--width", "24", "--blocks", "1", "--seed", "3"}) == 0);
  }
};

CliWorkspace& workspace() {
  static CliWorkspace ws;
  return ws;
}

}  // namespace

TEST_CASE("cli end-to-end: gen-data, train, metrics") {
  auto& ws = workspace();
  CHECK(fs::exists(ws.data / "manifest.json"));
  CHECK(fs::exists(ws.data / "scene_000" / "cloud.ply"));
  CHECK(fs::exists(ws.data / "scene_000" / "bps.f32"));
  CHECK(fs::exists(ws.data / "scene_000" / "grasps.jsonl"));
  CHECK(fs::exists(ws.data / "hammer_000" / "scene.json"));
  CHECK(fs::exists(ws.gan_run / "generator.ckpt"));
  CHECK(fs::exists(ws.gan_run / "discriminator.ckpt"));
  CHECK(fs::exists(ws.gan_run / "history.csv"));
  CHECK(fs::exists(ws.eval_run / "evaluator.ckpt"));

  const fs::path mout = ws.root / "metrics_out";
  CHECK(run_cli({"metrics", "--gen", ws.gan_run.string(), "--data",
                 ws.data.string(), "--out", mout.string(), "--samples", "16"}) == 0);
  CHECK(fs::exists(mout / "metrics.csv"));
  CHECK(count_lines(mout / "metrics.csv") >= 2);  // header + >=1 scene
}

TEST_CASE("cli sample is deterministic per seed") {
  auto& ws = workspace();
  const fs::path out1 = ws.root / "sample_a";
  const fs::path out2 = ws.root / "sample_b";
  CHECK(run_cli({"sample", "--gen", ws.gan_run.string(), "--scene",
                 (ws.data / "scene_000").string(), "--n", "20", "--seed", "5",
                 "--out", out1.string()}) == 0);
  CHECK(run_cli({"sample", "--gen", ws.gan_run.string(), "--scene",
                 (ws.data / "scene_000").string(), "--n", "20", "--seed", "5",
                 "--out", out2.string()}) == 0);
  CHECK(file_bytes(out1 / "grasps.jsonl") == file_bytes(out2 / "grasps.jsonl"));
  CHECK(count_lines(out1 / "grasps.jsonl") == 20);

  const fs::path out3 = ws.root / "sample_c";
  CHECK(run_cli({"sample", "--gen", ws.gan_run.string(), "--scene",
                 (ws.data / "scene_000").string(), "--n", "20", "--seed", "6",
                 "--out", out3.string()}) == 0);
  CHECK(file_bytes(out1 / "grasps.jsonl") != file_bytes(out3 / "grasps.jsonl"));

  // With an evaluator, scores.jsonl appears.
  const fs::path out4 = ws.root / "sample_d";
  CHECK(run_cli({"sample", "--gen", ws.gan_run.string(), "--eval",
                 ws.eval_run.string(), "--scene",
                 (ws.data / "scene_000").string(), "--n", "10", "--out",
                 out4.string()}) == 0);
  CHECK(count_lines(out4 / "scores.jsonl") == 10);
}

TEST_CASE("cli afford writes a 7-stage trace in algorithm order") {
  auto& ws = workspace();
  const fs::path out = ws.root / "afford_out";
  CHECK(run_cli({"afford", "--gen", ws.gan_run.string(), "--eval",
                 ws.eval_run.string(), "--scene",
                 (ws.data / "hammer_000").string(), "--affordance", "use",
                 "--oracle", "mock", "--n", "40", "--out", out.string()}) == 0);
  CHECK(fs::exists(out / "trace.jsonl"));
  CHECK(fs::exists(out / "top_grasp.json"));
  CHECK(fs::exists(out / "ranked.jsonl"));
  CHECK(count_lines(out / "trace.jsonl") == 7);

  std::ifstream is(out / "trace.jsonl");
  std::string line;
  const std::vector<std::string> stages = {"object_name", "part_name",
                                           "part_mask", "crop", "sample_grasps",
                                           "knn_filter", "rank"};
  for (const auto& expected : stages) {
    REQUIRE(std::getline(is, line));
    CHECK(line.find("\"" + expected + "\"") != std::string::npos);
  }
}

TEST_CASE("cli export-scene writes cloud and triad markers") {
  auto& ws = workspace();
  const fs::path out = ws.root / "export_out";
  CHECK(run_cli({"export-scene", "--scene", (ws.data / "scene_000").string(),
                 "--out", out.string(), "--max-grasps", "5"}) == 0);
  CHECK(fs::exists(out / "cloud.ply"));
  CHECK(fs::exists(out / "grasps.ply"));
  // 5 grasps x 4 marker points.
  std::ifstream is(out / "grasps.ply");
  std::string line;
  int vertices = -1;
  while (std::getline(is, line)) {
    if (line.rfind("element vertex ", 0) == 0)
      vertices = std::stoi(line.substr(15));
    if (line == "end_header") break;
  }
  CHECK(vertices == 20);
}

TEST_CASE("cli exit codes: usage 2, config 3, runtime 1") {
  auto& ws = workspace();
  CHECK(run_cli({"--definitely-not-a-flag"}) == 2);
  CHECK(run_cli({"no-such-subcommand"}) == 2);
  CHECK(run_cli({"sample", "--gen"}) == 2);  // missing value

  // Unknown config key -> config error.
  const fs::path bad_cfg = ws.root / "bad.cfg";
  {
    std::ofstream os(bad_cfg);
    os << "objects = 4\nnot_a_real_key = 1\n";
  }
  CHECK(run_cli({"gen-data", "--config", bad_cfg.string(), "--out",
                 (ws.root / "never").string()}) == 3);

  // Malformed config line -> config error.
  const fs::path worse_cfg = ws.root / "worse.cfg";
  {
    std::ofstream os(worse_cfg);
    os << "objects 4\n";
  }
  CHECK(run_cli({"gen-data", "--config", worse_cfg.string(), "--out",
                 (ws.root / "never2").string()}) == 3);

  // Missing checkpoint -> runtime error (1).
  CHECK(run_cli({"sample", "--gen", (ws.root / "missing").string(), "--scene",
                 (ws.data / "scene_000").string(), "--out",
                 (ws.root / "never3").string()}) == 1);
}

TEST_CASE("cli run manifests include the config hash") {
  auto& ws = workspace();
  std::ifstream is(ws.gan_run / "manifest.json");
  REQUIRE(is.good());
  std::string text((std::istreambuf_iterator<char>(is)), {});
  CHECK(text.find("config_hash") != std::string::npos);
  CHECK(text.find("train-gan") != std::string::npos);
}

TEST_CASE("gen-data reruns are byte-identical") {
  auto& ws = workspace();
  const fs::path data2 = ws.root / "data2";
  const fs::path cfg = ws.root / "toy.cfg";
  REQUIRE(run_cli({"gen-data", "--config", cfg.string(), "--out",
                   data2.string()}) == 0);
  CHECK(file_bytes(ws.data / "manifest.json") == file_bytes(data2 / "manifest.json"));
  CHECK(file_bytes(ws.data / "scene_002" / "grasps.jsonl") ==
        file_bytes(data2 / "scene_002" / "grasps.jsonl"));
  CHECK(file_bytes(ws.data / "hammer_000" / "bps.f32") ==
        file_bytes(data2 / "hammer_000" / "bps.f32"));
}
