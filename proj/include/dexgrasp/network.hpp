#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dexgrasp/rng.hpp"
#include "dexgrasp/tape.hpp"

namespace dexgrasp {

enum class Activation { identity, leaky_relu, tanh, sigmoid };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct HeadSpec {
  std::string name;
  int dim = 1;
  Activation act = Activation::identity;
};

/// Architecture of a residual MLP: input projection, `blocks` residual
/// blocks of two dense layers each, and one or more named output heads.
struct NetworkConfig {
  int input_dim = 1;
  int width = 256;
  int blocks = 3;
  Activation hidden_act = Activation::leaky_relu;
  double leaky_slope = 0.2;
  std::vector<HeadSpec> heads;
  std::uint64_t init_seed = 0;
  /// Concatenated input blocks (e.g. {bps, grasp}). When set, the input
  /// projection is initialized so each block contributes equal variance,
  /// keeping narrow blocks from being drowned out by wide ones.
  std::vector<int> input_groups;
  /// Multiplier on the head-weight init. Generators start near zero output
  /// so regression losses begin at the target scale. Init-time only.
  double head_init_scale = 1.0;

  /// Canonical architecture description. Deliberately excludes init_seed and
  /// provenance so that two nets trained on different data but with the same
  /// layout hash identically.
  std::string arch_string() const;
  std::uint64_t arch_hash() const;
};

std::uint64_t fnv1a_hash(const std::string& s);

class Network;

/// A network's parameters inserted as leaves on one tape, for one
/// forward/backward episode.
class BoundNetwork {
 public:
  /// Runs the net on `x` (batch x input_dim). Returns one Var per head.
  std::map<std::string, Var> forward(Var x) const;

  const std::vector<Var>& params() const { return param_vars_; }
  Tape& tape() const { return *tape_; }

 private:
  friend class Network;
  const Network* net_ = nullptr;
  Tape* tape_ = nullptr;
  std::vector<Var> param_vars_;
};

class Network {
 public:
  Network() = default;
  explicit Network(NetworkConfig cfg);

  const NetworkConfig& config() const { return cfg_; }
  std::size_t param_count() const;

  const std::vector<std::string>& param_names() const { return names_; }
  const std::vector<Mat>& param_values() const { return values_; }
  /// In-place access for optimizers; shapes must not change.
  std::vector<Mat>& mutable_param_values() { return values_; }
  Mat& param(const std::string& name);
  const Mat& param(const std::string& name) const;
  void set_params(const std::vector<Mat>& values);

  BoundNetwork bind(Tape& tape) const;

  /// Folds per-column standardization of `sample_inputs` into the input
  /// projection (data-dependent init): equivalent to feeding z-scored
  /// inputs, while keeping in_proj an ordinary trainable layer. The sigma
  /// floor keeps near-constant features from being amplified into the
  /// weights (desk-scale features are O(0.1..1)).
  void fold_input_standardization(const Mat& sample_inputs,
                                  double sigma_floor = 0.05);

  /// Convenience forward without keeping the tape around.
  std::map<std::string, Mat> forward_values(const Mat& x) const;

  /// FNV-1a over the raw parameter bytes; used by the freeze-discipline
  /// checks in training.
  std::uint64_t param_hash() const;

 private:
  friend class BoundNetwork;
  void add_param(const std::string& name, Mat value);

  NetworkConfig cfg_;
  std::vector<std::string> names_;
  std::vector<Mat> values_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace dexgrasp
