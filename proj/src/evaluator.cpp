#include "dexgrasp/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "dexgrasp/adam.hpp"

namespace dexgrasp {

Var evaluator_loss(Tape& t, Var probs, const Mat& labels) {
  require(probs.rows() == labels.rows() && labels.cols() == 1,
          Errc::shape_mismatch, "evaluator loss batches are not aligned");
  require(probs.rows() >= 1, Errc::empty_batch, "empty evaluator batch");
  const Var f = t.clamp(probs, kProbClamp, 1.0 - kProbClamp);
  const Var y = t.leaf(labels);
  const Var pos_term = t.mul(y, t.log(f));
  const Var neg_term =
      t.mul(t.add_scalar(t.neg(y), 1.0), t.log(t.add_scalar(t.neg(f), 1.0)));
  return t.neg(t.mean(t.add(pos_term, neg_term)));
}

NetworkConfig evaluator_config(int bps_dim, const EvalConfig& cfg) {
  NetworkConfig nc;
  nc.input_dim = bps_dim + 24;
  nc.width = cfg.width;
  nc.blocks = cfg.blocks;
  nc.hidden_act = Activation::leaky_relu;
  nc.leaky_slope = 0.2;
  nc.heads = {{"logit", 1, Activation::identity}};
  nc.input_groups = {bps_dim, 24};
  nc.init_seed = mix_seed(cfg.seed, 0x6576616cull);
  return nc;
}

namespace {

Mat scores_for_rows(const Network& net, const Mat& bps, const Mat& flat) {
  Mat input(bps.rows(), bps.cols() + flat.cols());
  input << bps, flat;
  Tape t;
  BoundNetwork b = net.bind(t);
  const Var logit = b.forward(t.leaf(input)).at("logit");
  return t.sigmoid(logit).value();
}

}  // namespace

TrainEvalResult train_evaluator(const std::vector<LoadedScene>& train_scenes,
                                const std::vector<LoadedScene>& val_scenes,
                                const EvalConfig& cfg) {
  require(cfg.batch >= 2 && cfg.epochs >= 1, Errc::config,
          "invalid evaluator config");
  const GraspRows rows = collect_rows(train_scenes, /*positives_only=*/false);
  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < rows.label.size(); ++i)
    (rows.label[i] ? pos_idx : neg_idx).push_back(i);
  require(!pos_idx.empty() && !neg_idx.empty(), Errc::single_class,
          "training split needs both labels");

  const int bps_dim = static_cast<int>(rows.bps.cols());
  TrainEvalResult result;
  result.evaluator = Network(evaluator_config(bps_dim, cfg));
  Network& net = result.evaluator;
  {
    Mat sample(rows.bps.rows(), bps_dim + 24);
    sample << rows.bps, rows.flat;
    net.fold_input_standardization(sample);
  }
  std::vector<Mat>& params = net.mutable_param_values();
  AdamState opt = AdamState::zeros_like(params);
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

  // Validation rows (may be empty; AUC is then reported as NaN-free 0).
  GraspRows val_rows;
  bool has_val = false;
  if (!val_scenes.empty()) {
    val_rows = collect_rows(val_scenes, /*positives_only=*/false);
    bool has_pos = false, has_neg = false;
    for (auto l : val_rows.label) (l ? has_pos : has_neg) = true;
    has_val = has_pos && has_neg;
  }

  Rng rng = Rng::derive(cfg.seed, 0x65747261ull);
  const int half = cfg.batch / 2;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = pos_idx.size(); i > 1; --i)
      std::swap(pos_idx[i - 1], pos_idx[rng.uniform_int(i)]);
    for (std::size_t i = neg_idx.size(); i > 1; --i)
      std::swap(neg_idx[i - 1], neg_idx[rng.uniform_int(i)]);

    const std::size_t steps_per_epoch =
        std::max<std::size_t>(1, std::min(pos_idx.size(), neg_idx.size()) /
                                     static_cast<std::size_t>(half));
    EvalEpochStats stats;
    stats.epoch = epoch;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      Mat bps(2 * half, bps_dim), flat(2 * half, 24), labels(2 * half, 1);
      for (int r = 0; r < half; ++r) {
        const auto pi = static_cast<Eigen::Index>(
            pos_idx[(step * half + r) % pos_idx.size()]);
        const auto ni = static_cast<Eigen::Index>(
            neg_idx[(step * half + r) % neg_idx.size()]);
        bps.row(2 * r) = rows.bps.row(pi);
        flat.row(2 * r) = rows.flat.row(pi);
        labels(2 * r, 0) = 1.0;
        bps.row(2 * r + 1) = rows.bps.row(ni);
        flat.row(2 * r + 1) = rows.flat.row(ni);
        labels(2 * r + 1, 0) = 0.0;
      }
      Tape t;
      BoundNetwork b = net.bind(t);
      Mat input(2 * half, bps_dim + 24);
      input << bps, flat;
      const Var logit = b.forward(t.leaf(input)).at("logit");
      const Var loss = evaluator_loss(t, t.sigmoid(logit), labels);
      const auto grad_vars = t.gradients(loss, b.params());
      std::vector<Mat> grads;
      grads.reserve(grad_vars.size());
      for (const Var& g : grad_vars) grads.push_back(g.value());
      adam_step(params, grads, opt, adam);
      stats.train_loss += loss.scalar();
    }
    stats.train_loss /= static_cast<double>(steps_per_epoch);

    if (has_val) {
      const Mat val_scores = scores_for_rows(net, val_rows.bps, val_rows.flat);
      std::vector<double> s(val_scores.data(),
                            val_scores.data() + val_scores.rows());
      stats.val_auc = roc_auc(s, val_rows.label);
    }
    result.history.push_back(stats);
  }
  return result;
}

std::vector<double> score_grasps(const Network& evaluator,
                                 const std::vector<double>& bps,
                                 const std::vector<Grasp>& grasps) {
  require(!grasps.empty(), Errc::empty_batch, "no grasps to score");
  const auto bps_dim = static_cast<Eigen::Index>(bps.size());
  require(bps_dim + 24 == evaluator.config().input_dim, Errc::shape_mismatch,
          "BPS dimension does not match the evaluator input layer");
  Mat bps_rows(static_cast<Eigen::Index>(grasps.size()), bps_dim);
  Mat flat(static_cast<Eigen::Index>(grasps.size()), 24);
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    for (Eigen::Index c = 0; c < bps_dim; ++c)
      bps_rows(static_cast<Eigen::Index>(i), c) = bps[static_cast<std::size_t>(c)];
    flat.row(static_cast<Eigen::Index>(i)) = grasp_flat_row(grasps[i]);
  }
  const Mat probs = scores_for_rows(evaluator, bps_rows, flat);
  return std::vector<double>(probs.data(), probs.data() + probs.rows());
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<std::uint8_t>& labels) {
  require(scores.size() == labels.size() && !scores.empty(),
          Errc::shape_mismatch, "roc_auc needs aligned non-empty inputs");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  std::size_t n_pos = 0, n_neg = 0;
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      } else {
        ++n_neg;
      }
    }
    i = j;
  }
  require(n_pos > 0 && n_neg > 0, Errc::single_class,
          "roc_auc needs both labels");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1) / 2.0) /
         (np * static_cast<double>(n_neg));
}

void write_eval_history_csv(const std::filesystem::path& path,
                            const std::vector<EvalEpochStats>& history) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  require(f != nullptr, Errc::io, "cannot open '" + path.string() + "'");
  std::fprintf(f, "epoch,train_loss,val_auc\n");
  for (const auto& h : history)
    std::fprintf(f, "%d,%.17g,%.17g\n", h.epoch, h.train_loss, h.val_auc);
  std::fclose(f);
}

}  // namespace dexgrasp
