#pragma once

#include <cstdint>
#include <vector>

#include "dexgrasp/gan.hpp"

namespace dexgrasp {

struct EvalConfig {
  double lr = 1e-4;
  int batch = 256;
  int epochs = 30;
  std::uint64_t seed = 1;
  int width = 256;
  int blocks = 3;
};

/// Binary cross-entropy: -mean(y log f + (1 - y) log(1 - f)).
/// `probs` is an n x 1 column of probabilities (clamped internally),
/// `labels` holds 0/1 per row.
Var evaluator_loss(Tape& t, Var probs, const Mat& labels);

struct EvalEpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainEvalResult {
  Network evaluator;
  std::vector<EvalEpochStats> history;
};

/// Supervised stability training with stratified 1:1 positive/negative
/// batches. Throws single-class when the training split lacks a label.
TrainEvalResult train_evaluator(const std::vector<LoadedScene>& train_scenes,
                                const std::vector<LoadedScene>& val_scenes,
                                const EvalConfig& cfg);

NetworkConfig evaluator_config(int bps_dim, const EvalConfig& cfg);

/// One stability probability per grasp, order-preserving.
std::vector<double> score_grasps(const Network& evaluator,
                                 const std::vector<double>& bps,
                                 const std::vector<Grasp>& grasps);

/// Rank-based ROC-AUC with average ranks on ties.
double roc_auc(const std::vector<double>& scores,
               const std::vector<std::uint8_t>& labels);

void write_eval_history_csv(const std::filesystem::path& path,
                            const std::vector<EvalEpochStats>& history);

}  // namespace dexgrasp
