#include "dexgrasp/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dexgrasp/checkpoint.hpp"
#include "dexgrasp/config.hpp"
#include "dexgrasp/dataset.hpp"
#include "dexgrasp/evaluator.hpp"
#include "dexgrasp/gan.hpp"
#include "dexgrasp/metrics.hpp"
#include "dexgrasp/pipeline.hpp"

namespace dexgrasp {

namespace {

constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

void write_run_manifest(const fs::path& out_dir, const std::string& subcommand,
                        const ConfigMap& effective) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["subcommand"] = subcommand;
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : effective) cfg[k] = v;
  j["config"] = cfg;
  j["config_hash"] = config_hash(effective);
  std::ofstream os(out_dir / "manifest.json", std::ios::trunc);
  os << j.dump(2) << "\n";
  require(os.good(), Errc::io, "cannot write run manifest");
}

ConfigMap load_base_config(const std::string& config_path) {
  if (config_path.empty()) return {};
  return parse_config_file(config_path);
}

void override_if(ConfigMap& cfg, const CLI::App* cmd, const std::string& flag,
                 const std::string& key) {
  if (cmd->count("--" + flag) > 0) {
    cfg[key] = cmd->get_option("--" + flag)->as<std::string>();
  }
}

DatasetConfig dataset_config_from(const ConfigMap& cfg) {
  validate_config_keys(
      cfg, {"objects", "views_per_object", "grasps_per_label", "view_points",
            "surface_points", "bps_size", "bps_seed", "master_seed",
            "cloud_scale", "train_fraction", "val_fraction",
            "ransac_threshold", "ransac_iterations", "table_points"});
  DatasetConfig d;
  d.objects = config_get_int(cfg, "objects", d.objects);
  d.views_per_object = config_get_int(cfg, "views_per_object", d.views_per_object);
  d.grasps_per_label = config_get_int(cfg, "grasps_per_label", d.grasps_per_label);
  d.view_points = config_get_int(cfg, "view_points", d.view_points);
  d.surface_points = config_get_int(cfg, "surface_points", d.surface_points);
  d.bps_size = config_get_int(cfg, "bps_size", d.bps_size);
  d.bps_seed = config_get_u64(cfg, "bps_seed", d.bps_seed);
  d.master_seed = config_get_u64(cfg, "master_seed", d.master_seed);
  d.cloud_scale = config_get_double(cfg, "cloud_scale", d.cloud_scale);
  d.train_fraction = config_get_double(cfg, "train_fraction", d.train_fraction);
  d.val_fraction = config_get_double(cfg, "val_fraction", d.val_fraction);
  d.ransac_threshold = config_get_double(cfg, "ransac_threshold", d.ransac_threshold);
  d.ransac_iterations = config_get_int(cfg, "ransac_iterations", d.ransac_iterations);
  d.table_points = config_get_int(cfg, "table_points", d.table_points);
  return d;
}

GanConfig gan_config_from(const ConfigMap& cfg) {
  validate_config_keys(cfg, {"mode", "lr", "batch", "epochs", "latent_dim",
                             "label_flip", "gp_lambda", "weight_clip", "w_t",
                             "w_r", "w_j", "seed", "width", "blocks",
                             "d_update_every", "pairing", "variety_k"});
  GanConfig g;
  g.mode = loss_mode_from_name(config_get(cfg, "mode", "cgan_dist"));
  g.lr = config_get_double(cfg, "lr", g.lr);
  g.batch = config_get_int(cfg, "batch", g.batch);
  g.epochs = config_get_int(cfg, "epochs", g.epochs);
  g.latent_dim = config_get_int(cfg, "latent_dim", g.latent_dim);
  g.label_flip = config_get_bool(cfg, "label_flip", g.label_flip);
  g.gp_lambda = config_get_double(cfg, "gp_lambda", g.gp_lambda);
  g.weight_clip = config_get_double(cfg, "weight_clip", g.weight_clip);
  g.weights.w_t = config_get_double(cfg, "w_t", g.weights.w_t);
  g.weights.w_r = config_get_double(cfg, "w_r", g.weights.w_r);
  g.weights.w_j = config_get_double(cfg, "w_j", g.weights.w_j);
  g.seed = config_get_u64(cfg, "seed", g.seed);
  g.width = config_get_int(cfg, "width", g.width);
  g.blocks = config_get_int(cfg, "blocks", g.blocks);
  g.d_update_every = config_get_int(cfg, "d_update_every", g.d_update_every);
  g.pairing = pairing_from_name(config_get(cfg, "pairing", "sample"));
  g.variety_k = config_get_int(cfg, "variety_k", g.variety_k);
  return g;
}

EvalConfig eval_config_from(const ConfigMap& cfg) {
  validate_config_keys(cfg, {"lr", "batch", "epochs", "seed", "width", "blocks"});
  EvalConfig e;
  e.lr = config_get_double(cfg, "lr", e.lr);
  e.batch = config_get_int(cfg, "batch", e.batch);
  e.epochs = config_get_int(cfg, "epochs", e.epochs);
  e.seed = config_get_u64(cfg, "seed", e.seed);
  e.width = config_get_int(cfg, "width", e.width);
  e.blocks = config_get_int(cfg, "blocks", e.blocks);
  return e;
}

Network load_network_from(const std::string& path_or_dir,
                          const std::string& default_name) {
  fs::path p(path_or_dir);
  if (fs::is_directory(p)) p /= default_name;
  return load_checkpoint(p).net;
}

std::vector<int> split_indices(const DatasetManifest& m, const std::string& split) {
  if (split == "train") return m.train_scenes;
  if (split == "val") return m.val_scenes;
  if (split == "test") return m.test_scenes;
  fail(Errc::config, "unknown split '" + split + "' (train|val|test)");
}

int run_gen_data(const std::string& config_path, const std::string& out,
                 const ConfigMap& overrides, int threads) {
  ConfigMap cfg = load_base_config(config_path);
  for (const auto& [k, v] : overrides) cfg[k] = v;
  const DatasetConfig dc = dataset_config_from(cfg);
  const fs::path out_dir(out);
  // The dataset manifest doubles as this run's manifest (config, hash,
  // seeds, splits); writing a second manifest.json would clobber it.
  build_dataset(dc, out_dir, threads);
  // Demo composite scene for the task-oriented pipeline.
  const BpsBasis basis = BpsBasis::generate(dc.bps_size, dc.bps_seed);
  write_hammer_scene(out_dir / "hammer_000", basis,
                     mix_seed(dc.master_seed, 0x68616dull), dc.cloud_scale);
  std::printf("dataset written to %s (%d scenes + hammer_000)\n",
              out_dir.string().c_str(), dc.objects * dc.views_per_object);
  return 0;
}

int run_train_gan(const std::string& data, const std::string& out,
                  const ConfigMap& cfg_map) {
  const GanConfig cfg = gan_config_from(cfg_map);
  const fs::path data_dir(data);
  const DatasetManifest manifest = read_manifest(data_dir);
  const auto scenes = load_split_scenes(data_dir, manifest, manifest.train_scenes);
  const TrainGanResult result = train_gan(scenes, cfg);

  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  CheckpointMeta meta;
  meta.epoch = static_cast<std::uint64_t>(cfg.epochs);
  meta.provenance = std::string("generator;mode=") + loss_mode_name(cfg.mode) +
                    ";dataset=" + std::to_string(manifest.config.config_hash());
  save_checkpoint(out_dir / "generator.ckpt", result.generator, meta);
  meta.provenance = std::string("discriminator;mode=") + loss_mode_name(cfg.mode) +
                    ";dataset=" + std::to_string(manifest.config.config_hash());
  save_checkpoint(out_dir / "discriminator.ckpt", result.discriminator, meta);
  write_gan_history_csv(out_dir / "history.csv", result.history, cfg.mode);
  write_run_manifest(out_dir, "train-gan", cfg_map);
  std::printf("trained %s for %d epochs on %zu scenes -> %s\n",
              loss_mode_name(cfg.mode), cfg.epochs, scenes.size(),
              out_dir.string().c_str());
  return 0;
}

int run_train_eval(const std::string& data, const std::string& out,
                   const ConfigMap& cfg_map) {
  const EvalConfig cfg = eval_config_from(cfg_map);
  const fs::path data_dir(data);
  const DatasetManifest manifest = read_manifest(data_dir);
  const auto train = load_split_scenes(data_dir, manifest, manifest.train_scenes);
  const auto val = load_split_scenes(data_dir, manifest, manifest.val_scenes);
  const TrainEvalResult result = train_evaluator(train, val, cfg);

  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  CheckpointMeta meta;
  meta.epoch = static_cast<std::uint64_t>(cfg.epochs);
  meta.provenance = "evaluator;dataset=" +
                    std::to_string(manifest.config.config_hash());
  save_checkpoint(out_dir / "evaluator.ckpt", result.evaluator, meta);
  write_eval_history_csv(out_dir / "history.csv", result.history);
  write_run_manifest(out_dir, "train-eval", cfg_map);
  const double final_auc =
      result.history.empty() ? 0.0 : result.history.back().val_auc;
  std::printf("evaluator trained, final val AUC %.4f -> %s\n", final_auc,
              out_dir.string().c_str());
  return 0;
}

int run_sample(const std::string& gen, const std::string& scene_dir, int n,
               std::uint64_t seed, const std::string& out,
               const std::string& eval) {
  const Network generator = load_network_from(gen, "generator.ckpt");
  const LoadedScene scene = load_scene(scene_dir);
  const auto grasps = sample_grasps(generator, scene.bps, n, seed);

  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  std::ofstream os(out_dir / "grasps.jsonl", std::ios::trunc);
  require(os.good(), Errc::io, "cannot write grasps.jsonl");
  for (const auto& g : grasps) os << grasp_to_json(g).dump() << "\n";
  os.close();

  if (!eval.empty()) {
    const Network evaluator = load_network_from(eval, "evaluator.ckpt");
    const auto scores = score_grasps(evaluator, scene.bps, grasps);
    std::ofstream ss(out_dir / "scores.jsonl", std::ios::trunc);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      nlohmann::json j;
      j["grasp_index"] = i;
      j["score"] = scores[i];
      ss << j.dump() << "\n";
    }
    require(ss.good(), Errc::io, "cannot write scores.jsonl");
  }

  ConfigMap effective;
  effective["n"] = std::to_string(n);
  effective["seed"] = std::to_string(seed);
  effective["scene"] = scene.name;
  write_run_manifest(out_dir, "sample", effective);
  std::printf("%d grasps sampled from %s -> %s\n", n, scene.name.c_str(),
              out_dir.string().c_str());
  return 0;
}

int run_metrics(const std::string& gen, const std::string& data,
                const std::string& split, int samples, std::uint64_t seed,
                const std::string& out) {
  const Network generator = load_network_from(gen, "generator.ckpt");
  const fs::path data_dir(data);
  const DatasetManifest manifest = read_manifest(data_dir);
  const auto indices = split_indices(manifest, split);
  const auto scenes = load_split_scenes(data_dir, manifest, indices);
  const auto rows = metrics_batch(generator, scenes, indices, samples, seed);

  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  write_metrics_csv(out_dir / "metrics.csv", rows);
  const MetricsSummary s = summarize_metrics(rows);
  ConfigMap effective;
  effective["split"] = split;
  effective["samples"] = std::to_string(samples);
  effective["seed"] = std::to_string(seed);
  write_run_manifest(out_dir, "metrics", effective);
  std::printf("metrics over %zu scenes: mean cov %.4f, magd_t_mean %.4f -> %s\n",
              rows.size(), s.mean_cov, s.magd_t_mean,
              out_dir.string().c_str());
  return 0;
}

int run_afford(const std::string& gen, const std::string& eval,
               const std::string& scene_dir, const std::string& affordance,
               const std::string& oracle_kind, const std::string& kb_path,
               const std::string& host, int port, double timeout, int n, int k,
               std::uint64_t seed, const std::string& out) {
  const Network generator = load_network_from(gen, "generator.ckpt");
  const Network evaluator = load_network_from(eval, "evaluator.ckpt");
  const LoadedScene scene = load_scene(scene_dir);

  std::unique_ptr<AffordanceOracle> oracle;
  if (oracle_kind == "mock") {
    if (kb_path.empty()) {
      oracle = std::make_unique<MockAffordanceOracle>(
          MockAffordanceOracle::with_default_kb());
    } else {
      std::ifstream is(kb_path);
      require(is.good(), Errc::config, "cannot open KB '" + kb_path + "'");
      nlohmann::json kb;
      is >> kb;
      oracle = std::make_unique<MockAffordanceOracle>(std::move(kb));
    }
  } else if (oracle_kind == "http") {
    oracle = std::make_unique<HttpAffordanceOracle>(host, port, timeout);
  } else {
    fail(Errc::config, "unknown oracle kind '" + oracle_kind + "' (mock|http)");
  }

  const fs::path out_dir(out);
  fs::create_directories(out_dir);

  AffordanceRequest req;
  req.affordance = affordance;
  req.image_ref = scene.name;
  req.cloud = scene.cloud;

  PipelineConfig pcfg;
  pcfg.n_samples = n;
  pcfg.knn_k = k;
  pcfg.seed = seed;
  pcfg.trace_path = out_dir / "trace.jsonl";

  const PipelineResult result = run_afford_pipeline(
      req, *oracle, generator, evaluator, scene.bps, scene.centroid, pcfg);

  std::ofstream ranked(out_dir / "ranked.jsonl", std::ios::trunc);
  for (const auto& r : result.ranked) {
    nlohmann::json j = grasp_to_json(r.grasp);
    j["score"] = r.score;
    if (r.filter_cost) j["filter_cost"] = *r.filter_cost;
    ranked << j.dump() << "\n";
  }
  require(ranked.good(), Errc::io, "cannot write ranked.jsonl");

  nlohmann::json top = grasp_to_json(result.top.grasp);
  top["score"] = result.top.score;
  top["object_name"] = result.object_name;
  top["part_name"] = result.part_name;
  std::ofstream top_os(out_dir / "top_grasp.json", std::ios::trunc);
  top_os << top.dump(2) << "\n";
  require(top_os.good(), Errc::io, "cannot write top_grasp.json");

  ConfigMap effective;
  effective["affordance"] = affordance;
  effective["oracle"] = oracle_kind;
  effective["n"] = std::to_string(n);
  effective["k"] = std::to_string(k);
  effective["seed"] = std::to_string(seed);
  write_run_manifest(out_dir, "afford", effective);
  std::printf("afford '%s' on %s: part '%s', top score %.4f -> %s\n",
              affordance.c_str(), scene.name.c_str(), result.part_name.c_str(),
              result.top.score, out_dir.string().c_str());
  return 0;
}

int run_export_scene(const std::string& scene_dir, const std::string& out,
                     const std::string& grasps_path, int max_grasps) {
  const LoadedScene scene = load_scene(scene_dir);
  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  write_ply(out_dir / "cloud.ply", scene.cloud);

  std::vector<Grasp> grasps;
  if (!grasps_path.empty()) {
    std::ifstream is(grasps_path);
    require(is.good(), Errc::io, "cannot open '" + grasps_path + "'");
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      grasps.push_back(grasp_from_json(nlohmann::json::parse(line)));
    }
  } else {
    for (const auto& lg : scene.grasps)
      if (lg.positive) grasps.push_back(lg.grasp);
  }
  if (max_grasps > 0 && static_cast<int>(grasps.size()) > max_grasps)
    grasps.resize(static_cast<std::size_t>(max_grasps));

  // One small triad per grasp pose: palm origin plus three axis tips,
  // mapped back into the cloud's frame via the stored centroid.
  PointCloud markers;
  for (const auto& g : grasps) {
    const Vec3 origin = g.translation + scene.centroid;
    markers.points.push_back(origin);
    for (int a = 0; a < 3; ++a)
      markers.points.push_back(origin + 0.02 * g.rotation.col(a));
  }
  write_ply(out_dir / "grasps.ply", markers);
  std::printf("exported %s with %zu grasp markers -> %s\n", scene.name.c_str(),
              grasps.size(), out_dir.string().c_str());
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"Dexterous grasp synthesis toolkit"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker cap for parallel stages");

  // gen-data
  auto* gen_data = app.add_subcommand("gen-data", "generate the toy dataset");
  std::string gd_config, gd_out;
  gen_data->add_option("--config", gd_config, "key=value config file");
  gen_data->add_option("--out", gd_out, "output dataset directory")->required();
  for (const char* flag : {"objects", "views_per_object", "grasps_per_label",
                           "view_points", "bps_size", "master_seed"})
    gen_data->add_option(std::string("--") + flag);

  // train-gan
  auto* train_gan_cmd = app.add_subcommand("train-gan", "train the cGAN");
  std::string tg_config, tg_data, tg_out;
  train_gan_cmd->add_option("--config", tg_config);
  train_gan_cmd->add_option("--data", tg_data)->required();
  train_gan_cmd->add_option("--out", tg_out)->required();
  for (const char* flag :
       {"mode", "epochs", "batch", "seed", "width", "blocks", "latent_dim",
        "lr", "label_flip", "gp_lambda", "w_t", "w_r", "w_j",
        "d_update_every", "weight_clip", "pairing", "variety_k"})
    train_gan_cmd->add_option(std::string("--") + flag);

  // train-eval
  auto* train_eval_cmd = app.add_subcommand("train-eval", "train the evaluator");
  std::string te_config, te_data, te_out;
  train_eval_cmd->add_option("--config", te_config);
  train_eval_cmd->add_option("--data", te_data)->required();
  train_eval_cmd->add_option("--out", te_out)->required();
  for (const char* flag : {"epochs", "batch", "seed", "width", "blocks", "lr"})
    train_eval_cmd->add_option(std::string("--") + flag);

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "sample grasps for a scene");
  std::string s_gen, s_scene, s_out, s_eval;
  int s_n = 100;
  std::uint64_t s_seed = 0;
  sample_cmd->add_option("--gen", s_gen)->required();
  sample_cmd->add_option("--scene", s_scene)->required();
  sample_cmd->add_option("--out", s_out)->required();
  sample_cmd->add_option("--eval", s_eval);
  sample_cmd->add_option("--n", s_n);
  sample_cmd->add_option("--seed", s_seed);

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "MAGD / coverage table");
  std::string m_gen, m_data, m_out, m_split = "test";
  int m_samples = 64;
  std::uint64_t m_seed = 0;
  metrics_cmd->add_option("--gen", m_gen)->required();
  metrics_cmd->add_option("--data", m_data)->required();
  metrics_cmd->add_option("--out", m_out)->required();
  metrics_cmd->add_option("--split", m_split);
  metrics_cmd->add_option("--samples", m_samples);
  metrics_cmd->add_option("--seed", m_seed);

  // afford
  auto* afford_cmd = app.add_subcommand("afford", "task-oriented grasping");
  std::string a_gen, a_eval, a_scene, a_affordance, a_out;
  std::string a_oracle = "mock", a_kb, a_host = "127.0.0.1";
  int a_port = 8080, a_n = 100, a_k = 30;
  double a_timeout = 10.0;
  std::uint64_t a_seed = 0;
  afford_cmd->add_option("--gen", a_gen)->required();
  afford_cmd->add_option("--eval", a_eval)->required();
  afford_cmd->add_option("--scene", a_scene)->required();
  afford_cmd->add_option("--affordance", a_affordance)->required();
  afford_cmd->add_option("--out", a_out)->required();
  afford_cmd->add_option("--oracle", a_oracle);
  afford_cmd->add_option("--kb", a_kb);
  afford_cmd->add_option("--oracle-host", a_host);
  afford_cmd->add_option("--oracle-port", a_port);
  afford_cmd->add_option("--oracle-timeout", a_timeout);
  afford_cmd->add_option("--n", a_n);
  afford_cmd->add_option("--k", a_k);
  afford_cmd->add_option("--seed", a_seed);

  // export-scene
  auto* export_cmd = app.add_subcommand("export-scene", "PLY export");
  std::string e_scene, e_out, e_grasps;
  int e_max = 0;
  export_cmd->add_option("--scene", e_scene)->required();
  export_cmd->add_option("--out", e_out)->required();
  export_cmd->add_option("--grasps", e_grasps);
  export_cmd->add_option("--max-grasps", e_max);

  try {
    app.parse(argc, argv);

    if (gen_data->parsed()) {
      ConfigMap overrides;
      for (const char* flag : {"objects", "views_per_object", "grasps_per_label",
                               "view_points", "bps_size", "master_seed"})
        override_if(overrides, gen_data, flag, flag);
      return run_gen_data(gd_config, gd_out, overrides, threads);
    }
    if (train_gan_cmd->parsed()) {
      ConfigMap cfg = load_base_config(tg_config);
      for (const char* flag :
           {"mode", "epochs", "batch", "seed", "width", "blocks", "latent_dim",
            "lr", "label_flip", "gp_lambda", "w_t", "w_r", "w_j",
            "d_update_every", "weight_clip", "pairing", "variety_k"})
        override_if(cfg, train_gan_cmd, flag, flag);
      return run_train_gan(tg_data, tg_out, cfg);
    }
    if (train_eval_cmd->parsed()) {
      ConfigMap cfg = load_base_config(te_config);
      for (const char* flag : {"epochs", "batch", "seed", "width", "blocks", "lr"})
        override_if(cfg, train_eval_cmd, flag, flag);
      return run_train_eval(te_data, te_out, cfg);
    }
    if (sample_cmd->parsed())
      return run_sample(s_gen, s_scene, s_n, s_seed, s_out, s_eval);
    if (metrics_cmd->parsed())
      return run_metrics(m_gen, m_data, m_split, m_samples, m_seed, m_out);
    if (afford_cmd->parsed())
      return run_afford(a_gen, a_eval, a_scene, a_affordance, a_oracle, a_kb,
                        a_host, a_port, a_timeout, a_n, a_k, a_seed, a_out);
    if (export_cmd->parsed())
      return run_export_scene(e_scene, e_out, e_grasps, e_max);
    std::fprintf(stderr, "error: usage: no subcommand given\n");
    return 2;
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == Errc::config ? 3 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
}

}  // namespace dexgrasp
