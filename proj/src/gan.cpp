#include "dexgrasp/gan.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <numeric>

#include "dexgrasp/adam.hpp"

namespace dexgrasp {

const char* loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::vanilla: return "vanilla";
    case LossMode::cgan_dist: return "cgan_dist";
    case LossMode::wgan: return "wgan";
    case LossMode::wgan_gp: return "wgan_gp";
  }
  return "unknown";
}

LossMode loss_mode_from_name(const std::string& name) {
  if (name == "vanilla") return LossMode::vanilla;
  if (name == "cgan_dist") return LossMode::cgan_dist;
  if (name == "wgan") return LossMode::wgan;
  if (name == "wgan_gp") return LossMode::wgan_gp;
  fail(Errc::config, "unknown loss mode '" + name + "'");
}

const char* pairing_name(DistancePairing p) {
  return p == DistancePairing::nearest ? "nearest" : "sample";
}

DistancePairing pairing_from_name(const std::string& name) {
  if (name == "nearest") return DistancePairing::nearest;
  if (name == "sample") return DistancePairing::sample;
  fail(Errc::config, "unknown pairing '" + name + "'");
}

Eigen::Matrix<double, 1, 24> grasp_flat_row(const Grasp& g) {
  Eigen::Matrix<double, 1, 24> row;
  row(0) = g.translation.x();
  row(1) = g.translation.y();
  row(2) = g.translation.z();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) row(3 + 3 * r + c) = g.rotation(r, c);
  for (int i = 0; i < kJointCount; ++i) row(12 + i) = g.joints[i];
  return row;
}

Grasp grasp_from_flat_row(const Eigen::Matrix<double, 1, 24>& row) {
  Grasp g;
  g.translation = Vec3(row(0), row(1), row(2));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) g.rotation(r, c) = row(3 + 3 * r + c);
  for (int i = 0; i < kJointCount; ++i) g.joints[i] = row(12 + i);
  return g;
}

GraspRows collect_rows(const std::vector<LoadedScene>& scenes,
                       bool positives_only) {
  require(!scenes.empty(), Errc::empty_batch, "no scenes to collect rows from");
  const auto bps_dim = static_cast<Eigen::Index>(scenes.front().bps.size());
  std::size_t n = 0;
  for (const auto& s : scenes) {
    require(static_cast<Eigen::Index>(s.bps.size()) == bps_dim,
            Errc::shape_mismatch, "inconsistent BPS dimension across scenes");
    for (const auto& lg : s.grasps)
      if (!positives_only || lg.positive) ++n;
  }
  require(n > 0, Errc::empty_batch, "no grasps matched the row filter");

  GraspRows rows;
  rows.bps.resize(static_cast<Eigen::Index>(n), bps_dim);
  rows.t.resize(static_cast<Eigen::Index>(n), 3);
  rows.r6.resize(static_cast<Eigen::Index>(n), 6);
  rows.j.resize(static_cast<Eigen::Index>(n), kJointCount);
  rows.flat.resize(static_cast<Eigen::Index>(n), 24);
  rows.label.reserve(n);
  rows.scene_of.reserve(n);

  Eigen::Index at = 0;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const auto& s = scenes[si];
    Eigen::RowVectorXd bps_row(bps_dim);
    for (Eigen::Index i = 0; i < bps_dim; ++i)
      bps_row(i) = s.bps[static_cast<std::size_t>(i)];
    for (const auto& lg : s.grasps) {
      if (positives_only && !lg.positive) continue;
      rows.bps.row(at) = bps_row;
      const Grasp& g = lg.grasp;
      rows.t.row(at) = Eigen::RowVector3d(g.translation.x(), g.translation.y(),
                                          g.translation.z());
      const Rotation6D r6 = rotation_to_6d(g.rotation);
      rows.r6.row(at) << r6.a.x(), r6.a.y(), r6.a.z(), r6.b.x(), r6.b.y(),
          r6.b.z();
      for (int i = 0; i < kJointCount; ++i) rows.j(at, i) = g.joints[i];
      rows.flat.row(at) = grasp_flat_row(g);
      rows.label.push_back(lg.positive ? 1 : 0);
      rows.scene_of.push_back(static_cast<int>(si));
      ++at;
    }
  }
  return rows;
}

std::vector<LoadedScene> load_split_scenes(
    const std::filesystem::path& dataset_dir, const DatasetManifest& manifest,
    const std::vector<int>& scene_indices) {
  std::vector<LoadedScene> out;
  out.reserve(scene_indices.size());
  for (int idx : scene_indices) {
    require(idx >= 0 && idx < static_cast<int>(manifest.scene_names.size()),
            Errc::config, "scene index out of range in split");
    out.push_back(load_scene(dataset_dir / manifest.scene_names[idx]));
  }
  return out;
}

namespace {

Var clamp_prob(Tape& t, Var p) { return t.clamp(p, kProbClamp, 1.0 - kProbClamp); }

void require_batch(Var v) {
  require(v.rows() >= 1 && v.cols() == 1, Errc::empty_batch,
          "loss expects a non-empty n x 1 probability column");
}

}  // namespace

Var discriminator_loss_from_logits(Tape& t, Var pos_logit, Var gen_logit) {
  // -mean log sigmoid(pos) - mean log(1 - sigmoid(gen)), via softplus.
  return t.add(t.mean(t.softplus(t.neg(pos_logit))),
               t.mean(t.softplus(gen_logit)));
}

Var generator_adversarial_loss_from_logits(Tape& t, Var gen_logit,
                                           bool label_flip) {
  if (label_flip) return t.mean(t.softplus(t.neg(gen_logit)));
  return t.neg(t.mean(t.softplus(gen_logit)));
}

Var discriminator_loss(Tape& t, Var d_pos, Var d_gen) {
  require_batch(d_pos);
  require_batch(d_gen);
  const Var lp = t.mean(t.log(clamp_prob(t, d_pos)));
  const Var lg = t.mean(t.log(t.add_scalar(t.neg(clamp_prob(t, d_gen)), 1.0)));
  return t.neg(t.add(lp, lg));
}

Var generator_adversarial_loss(Tape& t, Var d_gen, bool label_flip) {
  require_batch(d_gen);
  if (label_flip) {
    return t.neg(t.mean(t.log(clamp_prob(t, d_gen))));
  }
  return t.mean(t.log(t.add_scalar(t.neg(clamp_prob(t, d_gen)), 1.0)));
}

namespace {

Var mean_row_sqnorm(Tape& t, Var diff) {
  return t.mean(t.sum_cols(t.square(diff)));
}

}  // namespace

DistanceLossTerms distance_loss(Tape& t, Var t_gen, Var r6_gen, Var j_gen,
                                const Mat& t_pos, const Mat& r6_pos,
                                const Mat& j_pos, const LossWeights& w) {
  require(t_gen.rows() == t_pos.rows() && r6_gen.rows() == r6_pos.rows() &&
              j_gen.rows() == j_pos.rows() && t_gen.rows() == r6_gen.rows() &&
              t_gen.rows() == j_gen.rows(),
          Errc::shape_mismatch, "distance loss batches are not aligned");
  require(w.w_t >= 0 && w.w_r >= 0 && w.w_j >= 0, Errc::config,
          "distance weights must be nonnegative");
  DistanceLossTerms terms;
  terms.translation =
      t.scale(mean_row_sqnorm(t, t.sub(t_gen, t.leaf(t_pos))), w.w_t);
  terms.rotation =
      t.scale(mean_row_sqnorm(t, t.sub(r6_gen, t.leaf(r6_pos))), w.w_r);
  terms.joints = t.scale(mean_row_sqnorm(t, t.sub(j_gen, t.leaf(j_pos))), w.w_j);
  terms.total = t.add(t.add(terms.translation, terms.rotation), terms.joints);
  return terms;
}

WganLosses wgan_losses(Tape& t, Var critic_pos, Var critic_gen, LossMode mode,
                       double gp_lambda, const BoundNetwork* critic,
                       Var bps_rows, Var interp_grasp) {
  require(mode == LossMode::wgan || mode == LossMode::wgan_gp, Errc::config,
          "wgan_losses called with a non-wasserstein mode");
  require_batch(critic_pos);
  require_batch(critic_gen);
  if (mode == LossMode::wgan) {
    require(!interp_grasp.valid(), Errc::config,
            "gradient penalty requested with mode=wgan");
  }
  WganLosses out;
  out.critic_loss = t.sub(t.mean(critic_gen), t.mean(critic_pos));
  out.gen_loss = t.neg(t.mean(critic_gen));
  if (mode == LossMode::wgan_gp) {
    require(critic != nullptr && interp_grasp.valid() && bps_rows.valid(),
            Errc::config, "wgan_gp needs the bound critic and interpolates");
    const Var critic_out =
        critic->forward(t.concat_cols({bps_rows, interp_grasp})).at("logit");
    const Var grad =
        t.gradients(t.sum(critic_out), {interp_grasp})[0];
    const Var norm = t.sqrt(t.add_scalar(t.sum_cols(t.square(grad)), 1e-12));
    const Var penalty = t.mean(t.square(t.add_scalar(norm, -1.0)));
    out.critic_loss = t.add(out.critic_loss, t.scale(penalty, gp_lambda));
  }
  return out;
}

Var rotation6d_to_flat9(Tape& t, Var r6) {
  require(r6.cols() == 6, Errc::shape_mismatch, "rotation head must have 6 columns");
  constexpr double kEps = 1e-12;
  const Var v1 = t.slice_cols(r6, 0, 3);
  const Var v2 = t.slice_cols(r6, 3, 3);
  const Var n1 = t.sqrt(t.add_scalar(t.sum_cols(t.square(v1)), kEps));
  const Var c0 = t.div(v1, t.broadcast_col(n1, 3));
  const Var proj = t.sum_cols(t.mul(c0, v2));
  const Var orth = t.sub(v2, t.mul(t.broadcast_col(proj, 3), c0));
  const Var n2 = t.sqrt(t.add_scalar(t.sum_cols(t.square(orth)), kEps));
  const Var c1 = t.div(orth, t.broadcast_col(n2, 3));
  auto col = [&t](Var m, int i) { return t.slice_cols(m, i, 1); };
  // c2 = c0 x c1, componentwise.
  const Var c2x = t.sub(t.mul(col(c0, 1), col(c1, 2)), t.mul(col(c0, 2), col(c1, 1)));
  const Var c2y = t.sub(t.mul(col(c0, 2), col(c1, 0)), t.mul(col(c0, 0), col(c1, 2)));
  const Var c2z = t.sub(t.mul(col(c0, 0), col(c1, 1)), t.mul(col(c0, 1), col(c1, 0)));
  // Row-major: row r of R is (c0[r], c1[r], c2[r]).
  return t.concat_cols({col(c0, 0), col(c1, 0), c2x,
                        col(c0, 1), col(c1, 1), c2y,
                        col(c0, 2), col(c1, 2), c2z});
}

Var scale_joints_to_limits(Tape& t, Var j_tanh, const JointLimits& limits) {
  require(j_tanh.cols() == kJointCount, Errc::shape_mismatch,
          "joint head must have 12 columns");
  Mat half(1, kJointCount), lo(1, kJointCount);
  for (int i = 0; i < kJointCount; ++i) {
    half(0, i) = (limits.upper[i] - limits.lower[i]) / 2.0;
    lo(0, i) = limits.lower[i];
  }
  const Var scaled = t.mul(t.add_scalar(j_tanh, 1.0),
                           t.broadcast_row(t.leaf(half), static_cast<int>(j_tanh.rows())));
  return t.bias_add(scaled, t.leaf(lo));
}

NetworkConfig generator_config(int bps_dim, const GanConfig& cfg) {
  NetworkConfig nc;
  nc.input_dim = bps_dim + cfg.latent_dim;
  nc.width = cfg.width;
  nc.blocks = cfg.blocks;
  nc.hidden_act = Activation::leaky_relu;
  nc.leaky_slope = 0.2;
  nc.heads = {{"translation", 3, Activation::identity},
              {"rotation6d", 6, Activation::identity},
              {"joints", kJointCount, Activation::tanh}};
  nc.input_groups = {bps_dim, cfg.latent_dim};
  nc.head_init_scale = 1e-4;
  nc.init_seed = mix_seed(cfg.seed, 0x67656e00ull);
  return nc;
}

NetworkConfig discriminator_config(int bps_dim, const GanConfig& cfg) {
  NetworkConfig nc;
  nc.input_dim = bps_dim + 24;
  nc.width = cfg.width;
  nc.blocks = cfg.blocks;
  nc.hidden_act = Activation::leaky_relu;
  nc.leaky_slope = 0.2;
  nc.heads = {{"logit", 1, Activation::identity}};
  nc.input_groups = {bps_dim, 24};
  nc.init_seed = mix_seed(cfg.seed, 0x64697363ull);
  return nc;
}

Grasp decode_generator_row(const Eigen::RowVectorXd& t_row,
                           const Eigen::RowVectorXd& r6_row,
                           const Eigen::RowVectorXd& j_row,
                           const JointLimits& limits, double workspace_radius) {
  Grasp g;
  Rotation6D r6{Vec3(r6_row(0), r6_row(1), r6_row(2)),
                Vec3(r6_row(3), r6_row(4), r6_row(5))};
  g.rotation = rotation6d_to_rotation(r6);
  g.translation = Vec3(t_row(0), t_row(1), t_row(2));
  const double norm = g.translation.norm();
  if (norm > workspace_radius)
    g.translation *= workspace_radius / norm;
  for (int i = 0; i < kJointCount; ++i) {
    g.joints[i] =
        std::min(std::max(j_row(i), limits.lower[i]), limits.upper[i]);
  }
  return g;
}

namespace {

/// Numeric (tape-free) generator decode used where the generator is frozen.
Mat generator_fake_flat(const Network& generator, const Mat& bps_rows,
                        const Mat& z, const JointLimits& limits) {
  Mat input(bps_rows.rows(), bps_rows.cols() + z.cols());
  input << bps_rows, z;
  Tape t;
  BoundNetwork g = generator.bind(t);
  auto heads = g.forward(t.leaf(input));
  const Var r9 = rotation6d_to_flat9(t, heads.at("rotation6d"));
  const Var js = scale_joints_to_limits(t, heads.at("joints"), limits);
  const Var flat = t.concat_cols({heads.at("translation"), r9, js});
  return flat.value();
}

}  // namespace

TrainGanResult train_gan(const std::vector<LoadedScene>& train_scenes,
                         const GanConfig& cfg) {
  require(!train_scenes.empty(), Errc::empty_batch,
          "gan training needs at least one scene");
  require(cfg.batch >= 1 && cfg.epochs >= 1 && cfg.latent_dim >= 1,
          Errc::config, "invalid gan config");
  const GraspRows rows = collect_rows(train_scenes, /*positives_only=*/true);
  const int bps_dim = static_cast<int>(rows.bps.cols());
  const JointLimits limits = JointLimits::defaults();

  TrainGanResult result;
  result.generator = Network(generator_config(bps_dim, cfg));
  result.discriminator = Network(discriminator_config(bps_dim, cfg));
  Network& gen = result.generator;
  Network& disc = result.discriminator;
  {
    Rng std_rng = Rng::derive(cfg.seed, 0x7374640aull);
    const auto n_rows = std::min<Eigen::Index>(rows.bps.rows(), 2048);
    Mat gen_sample(n_rows, bps_dim + cfg.latent_dim);
    Mat disc_sample(n_rows, bps_dim + 24);
    for (Eigen::Index r = 0; r < n_rows; ++r) {
      gen_sample.block(r, 0, 1, bps_dim) = rows.bps.row(r);
      for (int c = 0; c < cfg.latent_dim; ++c)
        gen_sample(r, bps_dim + c) = std_rng.normal();
      disc_sample.block(r, 0, 1, bps_dim) = rows.bps.row(r);
      disc_sample.block(r, bps_dim, 1, 24) = rows.flat.row(r);
    }
    gen.fold_input_standardization(gen_sample);
    disc.fold_input_standardization(disc_sample);
  }

  std::vector<Mat>& gen_params = gen.mutable_param_values();
  std::vector<Mat>& disc_params = disc.mutable_param_values();
  AdamState gen_opt = AdamState::zeros_like(gen_params);
  AdamState disc_opt = AdamState::zeros_like(disc_params);
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

  Rng rng = Rng::derive(cfg.seed, 0x7472610aull);
  const auto n = static_cast<std::size_t>(rows.bps.rows());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  // Row indices per scene, for nearest-positive pairing.
  std::vector<std::vector<std::size_t>> scene_rows;
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(rows.scene_of[i]);
    if (scene_rows.size() <= s) scene_rows.resize(s + 1);
    scene_rows[s].push_back(i);
  }

  const bool wasserstein =
      cfg.mode == LossMode::wgan || cfg.mode == LossMode::wgan_gp;
  const bool with_distance = cfg.mode != LossMode::vanilla;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(perm[i - 1], perm[rng.uniform_int(i)]);

    GanEpochStats stats;
    stats.epoch = epoch;
    int steps = 0;
    int d_steps = 0;
    long batch_index = -1;
    for (std::size_t start = 0; start + 1 <= n; start += cfg.batch) {
      const auto b = std::min<std::size_t>(cfg.batch, n - start);
      if (b < 2) break;  // adversarial stats need at least two rows
      ++batch_index;
      Mat xb(b, bps_dim), tb(b, 3), r6b(b, 6), jb(b, kJointCount), flatb(b, 24);
      for (std::size_t r = 0; r < b; ++r) {
        const auto src = static_cast<Eigen::Index>(perm[start + r]);
        xb.row(r) = rows.bps.row(src);
        tb.row(r) = rows.t.row(src);
        r6b.row(r) = rows.r6.row(src);
        jb.row(r) = rows.j.row(src);
        flatb.row(r) = rows.flat.row(src);
      }

      const bool update_d =
          cfg.d_update_every <= 1 || batch_index % cfg.d_update_every == 0;
      try {
        // ---- step 1: discriminator update, generator frozen ----
        // (throttled: "reduced discriminator training")
        if (update_d) {
        Mat z1(b, cfg.latent_dim);
        for (Eigen::Index r = 0; r < z1.rows(); ++r)
          for (Eigen::Index c = 0; c < z1.cols(); ++c) z1(r, c) = rng.normal();
        const Mat fake_flat = generator_fake_flat(gen, xb, z1, limits);

        Tape td;
        BoundNetwork bd = disc.bind(td);
        const Var xb_v = td.leaf(xb);
        const Var pos_out =
            bd.forward(td.concat_cols({xb_v, td.leaf(flatb)})).at("logit");
        const Var gen_out =
            bd.forward(td.concat_cols({xb_v, td.leaf(fake_flat)})).at("logit");
        Var d_loss;
        if (wasserstein) {
          Var interp{};
          if (cfg.mode == LossMode::wgan_gp) {
            Mat mix(b, 24);
            for (std::size_t r = 0; r < b; ++r) {
              const double u = rng.uniform();
              mix.row(r) = u * flatb.row(r) + (1.0 - u) * fake_flat.row(r);
            }
            interp = td.leaf(mix);
          }
          d_loss = wgan_losses(td, pos_out, gen_out, cfg.mode, cfg.gp_lambda,
                               &bd, xb_v, interp)
                       .critic_loss;
        } else {
          d_loss = discriminator_loss_from_logits(td, pos_out, gen_out);
        }
        const auto d_grad_vars = td.gradients(d_loss, bd.params());
        std::vector<Mat> d_grads;
        d_grads.reserve(d_grad_vars.size());
        for (const Var& g : d_grad_vars) d_grads.push_back(g.value());
        adam_step(disc_params, d_grads, disc_opt, adam);
        if (cfg.mode == LossMode::wgan) {
          for (auto& p : disc_params)
            p = p.array().max(-cfg.weight_clip).min(cfg.weight_clip).matrix();
        }
        stats.d_loss += d_loss.scalar();
        ++d_steps;
        }

        // ---- step 2: generator update, discriminator frozen ----
        const int K = with_distance ? std::max(1, cfg.variety_k) : 1;
        const auto bk = b * static_cast<std::size_t>(K);
        Mat z2(bk, cfg.latent_dim);
        for (Eigen::Index r = 0; r < z2.rows(); ++r)
          for (Eigen::Index c = 0; c < z2.cols(); ++c) z2(r, c) = rng.normal();
        Tape tg;
        BoundNetwork bg = gen.bind(tg);
        BoundNetwork bd2 = disc.bind(tg);
        // Rows are grouped per sample: draw k of sample r sits at r*K + k.
        Mat gin(bk, bps_dim + cfg.latent_dim);
        Mat xbk(bk, bps_dim);
        for (std::size_t r = 0; r < b; ++r)
          for (int k = 0; k < K; ++k)
            xbk.row(static_cast<Eigen::Index>(r * K + k)) = xb.row(static_cast<Eigen::Index>(r));
        gin << xbk, z2;
        auto heads = bg.forward(tg.leaf(gin));
        const Var t_head = heads.at("translation");
        const Var r6_head = heads.at("rotation6d");
        const Var j_scaled = scale_joints_to_limits(tg, heads.at("joints"), limits);
        const Var r9 = rotation6d_to_flat9(tg, r6_head);
        const Var fake_graph = tg.concat_cols({t_head, r9, j_scaled});
        const Var d_gen2 =
            bd2.forward(tg.concat_cols({tg.leaf(xbk), fake_graph})).at("logit");

        // Targets per generated row (replicated across the k draws).
        Mat tbk(bk, 3), r6bk(bk, 6), jbk(bk, kJointCount);
        for (std::size_t r = 0; r < b; ++r) {
          for (int k = 0; k < K; ++k) {
            const auto row = static_cast<Eigen::Index>(r * K + k);
            tbk.row(row) = tb.row(static_cast<Eigen::Index>(r));
            r6bk.row(row) = r6b.row(static_cast<Eigen::Index>(r));
            jbk.row(row) = jb.row(static_cast<Eigen::Index>(r));
          }
        }
        if (cfg.pairing == DistancePairing::nearest && with_distance) {
          // Re-target each draw to the translation-nearest positive of its
          // scene (matching is a detached choice).
          const Mat& t_now = t_head.value();
          for (std::size_t r = 0; r < b; ++r) {
            const auto& candidates =
                scene_rows[static_cast<std::size_t>(rows.scene_of[perm[start + r]])];
            for (int k = 0; k < K; ++k) {
              const auto row = static_cast<Eigen::Index>(r * K + k);
              std::size_t best = perm[start + r];
              double best_d = std::numeric_limits<double>::infinity();
              for (std::size_t cand : candidates) {
                const double d =
                    (rows.t.row(static_cast<Eigen::Index>(cand)) - t_now.row(row))
                        .squaredNorm();
                if (d < best_d) {
                  best_d = d;
                  best = cand;
                }
              }
              const auto bi = static_cast<Eigen::Index>(best);
              tbk.row(row) = rows.t.row(bi);
              r6bk.row(row) = rows.r6.row(bi);
              jbk.row(row) = rows.j.row(bi);
            }
          }
        }

        Var adv;
        if (wasserstein) {
          adv = tg.neg(tg.mean(d_gen2));
        } else {
          adv = generator_adversarial_loss_from_logits(tg, d_gen2,
                                                       cfg.label_flip);
        }
        Var g_loss = adv;
        double lt = 0.0, lr_ = 0.0, lj = 0.0;
        if (with_distance) {
          // Per-row weighted squared distances (n x 1 columns).
          const Var dt = tg.sum_cols(tg.square(tg.sub(t_head, tg.leaf(tbk))));
          const Var dr = tg.sum_cols(tg.square(tg.sub(r6_head, tg.leaf(r6bk))));
          const Var dj = tg.sum_cols(tg.square(tg.sub(j_scaled, tg.leaf(jbk))));
          const Var combined = tg.add(
              tg.add(tg.scale(dt, cfg.weights.w_t), tg.scale(dr, cfg.weights.w_r)),
              tg.scale(dj, cfg.weights.w_j));
          // Best-of-k selection mask (detached): one winner per sample.
          Mat mask = Mat::Zero(bk, 1);
          const Mat& d_now = combined.value();
          for (std::size_t r = 0; r < b; ++r) {
            int best_k = 0;
            for (int k = 1; k < K; ++k) {
              if (d_now(static_cast<Eigen::Index>(r * K + k), 0) <
                  d_now(static_cast<Eigen::Index>(r * K + best_k), 0))
                best_k = k;
            }
            mask(static_cast<Eigen::Index>(r * K + best_k), 0) = 1.0;
          }
          const Var mask_v = tg.leaf(mask);
          const double inv_b = 1.0 / static_cast<double>(b);
          const Var l_t = tg.scale(tg.sum(tg.mul(mask_v, tg.scale(dt, cfg.weights.w_t))), inv_b);
          const Var l_r = tg.scale(tg.sum(tg.mul(mask_v, tg.scale(dr, cfg.weights.w_r))), inv_b);
          const Var l_j = tg.scale(tg.sum(tg.mul(mask_v, tg.scale(dj, cfg.weights.w_j))), inv_b);
          const Var dist_total = tg.add(tg.add(l_t, l_r), l_j);
          g_loss = tg.add(adv, dist_total);
          lt = l_t.scalar();
          lr_ = l_r.scalar();
          lj = l_j.scalar();
        }
        const auto g_grad_vars = tg.gradients(g_loss, bg.params());
        std::vector<Mat> g_grads;
        g_grads.reserve(g_grad_vars.size());
        for (const Var& g : g_grad_vars) g_grads.push_back(g.value());
        adam_step(gen_params, g_grads, gen_opt, adam);

        stats.g_adv += adv.scalar();
        stats.l_transl += lt;
        stats.l_rot += lr_;
        stats.l_joint += lj;
        ++steps;
      } catch (const Error& e) {
        if (e.code() == Errc::nan_loss) {
          fail(Errc::nan_loss, "training diverged at epoch " +
                                   std::to_string(epoch) + ": " + e.what());
        }
        throw;
      }
    }
    require(steps > 0, Errc::empty_batch, "no full training batch available");
    stats.d_loss /= std::max(d_steps, 1);
    stats.g_adv /= steps;
    stats.l_transl /= steps;
    stats.l_rot /= steps;
    stats.l_joint /= steps;
    result.history.push_back(stats);
  }

  return result;
}

void write_gan_history_csv(const std::filesystem::path& path,
                           const std::vector<GanEpochStats>& history,
                           LossMode mode) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  require(f != nullptr, Errc::io, "cannot open '" + path.string() + "'");
  std::fprintf(f, "epoch,L_D,L_fake_gen,L_transl,L_rot,L_joint,mode\n");
  for (const auto& h : history) {
    std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", h.epoch, h.d_loss,
                 h.g_adv, h.l_transl, h.l_rot, h.l_joint, loss_mode_name(mode));
  }
  std::fclose(f);
}

}  // namespace dexgrasp
