#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dexgrasp/dataset.hpp"
#include "dexgrasp/geometry.hpp"
#include "dexgrasp/network.hpp"

namespace dexgrasp {

enum class LossMode { vanilla, cgan_dist, wgan, wgan_gp };

const char* loss_mode_name(LossMode m);
LossMode loss_mode_from_name(const std::string& name);

/// How generated grasps are paired with ground truth for the distance loss:
/// `nearest` matches each generated grasp to the translation-nearest
/// positive of its own scene (Chamfer-style; keeps latent diversity alive),
/// `sample` pairs it with the positive of its own training row.
enum class DistancePairing { nearest, sample };

const char* pairing_name(DistancePairing p);
DistancePairing pairing_from_name(const std::string& name);

struct LossWeights {
  double w_t = 100.0;
  double w_r = 10.0;
  double w_j = 1.0;
};

struct GanConfig {
  LossMode mode = LossMode::cgan_dist;
  double lr = 1e-4;
  int batch = 32;
  int epochs = 60;
  int latent_dim = 16;
  bool label_flip = true;
  double gp_lambda = 10.0;
  double weight_clip = 0.01;
  LossWeights weights;
  std::uint64_t seed = 1;
  int width = 256;
  int blocks = 3;
  /// Reduced discriminator training: the discriminator updates on every
  /// n-th batch while the generator updates on all of them.
  int d_update_every = 2;
  DistancePairing pairing = DistancePairing::sample;
  /// Best-of-k latent draws per training sample for the distance loss: only
  /// the draw closest to the target (in the weighted distance) is pulled
  /// toward it, so latent diversity is not regressed away. 1 = plain
  /// single-draw pairing.
  int variety_k = 4;
};

/// Flattened (conditioning, grasp) rows assembled from loaded scenes.
/// Grasps flatten to 24 columns: translation (3), rotation row-major (9),
/// joints (12).
struct GraspRows {
  Mat bps;     // n x B
  Mat t;       // n x 3
  Mat r6;      // n x 6 (first two rotation columns)
  Mat j;       // n x 12
  Mat flat;    // n x 24
  std::vector<std::uint8_t> label;
  std::vector<int> scene_of;
};

Eigen::Matrix<double, 1, 24> grasp_flat_row(const Grasp& g);
Grasp grasp_from_flat_row(const Eigen::Matrix<double, 1, 24>& row);

GraspRows collect_rows(const std::vector<LoadedScene>& scenes,
                       bool positives_only);

/// Scenes of one split, loaded in index order.
std::vector<LoadedScene> load_split_scenes(
    const std::filesystem::path& dataset_dir, const DatasetManifest& manifest,
    const std::vector<int>& scene_indices);

// ---- losses (probabilities go in already sigmoid-ed; clamped internally) ----

inline constexpr double kProbClamp = 1e-7;

/// -mean(log d_pos) - mean(log(1 - d_gen)).
Var discriminator_loss(Tape& t, Var d_pos, Var d_gen);

/// label_flip=true: -mean(log d_gen) (generated grasps labeled real);
/// label_flip=false: mean(log(1 - d_gen)).
Var generator_adversarial_loss(Tape& t, Var d_gen, bool label_flip);

/// The same losses computed from raw logits via softplus. Identical values
/// away from the probability clamp, with gradients that do not die when the
/// discriminator saturates; the training loop uses these.
Var discriminator_loss_from_logits(Tape& t, Var pos_logit, Var gen_logit);
Var generator_adversarial_loss_from_logits(Tape& t, Var gen_logit,
                                           bool label_flip);

struct DistanceLossTerms {
  Var translation;  // w_t * mean |t_gen - t_pos|^2
  Var rotation;     // w_r * mean |r6_gen - r6(R_pos)|^2
  Var joints;       // w_j * mean |j_gen - j_pos|^2
  Var total;
};

DistanceLossTerms distance_loss(Tape& t, Var t_gen, Var r6_gen, Var j_gen,
                                const Mat& t_pos, const Mat& r6_pos,
                                const Mat& j_pos, const LossWeights& w);

struct WganLosses {
  Var critic_loss;
  Var gen_loss;
};

/// critic_loss = mean(critic_gen) - mean(critic_pos), plus
/// gp_lambda * mean((|grad_x critic(x_hat)| - 1)^2) over the interpolated
/// grasp rows when mode is wgan_gp. Passing interpolates with plain wgan is
/// a config error.
WganLosses wgan_losses(Tape& t, Var critic_pos, Var critic_gen, LossMode mode,
                       double gp_lambda, const BoundNetwork* critic,
                       Var bps_rows, Var interp_grasp);

/// Differentiable Gram-Schmidt turning an n x 6 rotation head into n x 9
/// row-major rotation entries.
Var rotation6d_to_flat9(Tape& t, Var r6);

/// Joint head scaling: tanh output in (-1,1) to the joint-limit box.
Var scale_joints_to_limits(Tape& t, Var j_tanh, const JointLimits& limits);

// ---- training ----

struct GanEpochStats {
  int epoch = 0;
  double d_loss = 0.0;
  double g_adv = 0.0;
  double l_transl = 0.0;
  double l_rot = 0.0;
  double l_joint = 0.0;
};

struct TrainGanResult {
  Network generator;
  Network discriminator;
  std::vector<GanEpochStats> history;
};

NetworkConfig generator_config(int bps_dim, const GanConfig& cfg);
NetworkConfig discriminator_config(int bps_dim, const GanConfig& cfg);

/// Two-step adversarial training. Step 1 updates the discriminator with the
/// generator frozen; step 2 updates only the generator (see module notes on
/// the freeze choice). Deterministic given cfg.seed.
TrainGanResult train_gan(const std::vector<LoadedScene>& train_scenes,
                         const GanConfig& cfg);

void write_gan_history_csv(const std::filesystem::path& path,
                           const std::vector<GanEpochStats>& history,
                           LossMode mode);

/// Decode generator head rows into validated grasps (orthonormal rotation,
/// joints inside limits, translation clamped into the workspace ball).
Grasp decode_generator_row(const Eigen::RowVectorXd& t_row,
                           const Eigen::RowVectorXd& r6_row,
                           const Eigen::RowVectorXd& j_row,
                           const JointLimits& limits,
                           double workspace_radius = 1.0);

}  // namespace dexgrasp
