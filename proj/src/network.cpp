#include "dexgrasp/network.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "dexgrasp/errors.hpp"

namespace dexgrasp {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "unknown";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  fail(Errc::config, "unknown activation '" + name + "'");
}

std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string NetworkConfig::arch_string() const {
  std::ostringstream os;
  os << "in=" << input_dim << ";width=" << width << ";blocks=" << blocks
     << ";act=" << activation_name(hidden_act) << ";slope=" << leaky_slope;
  if (!input_groups.empty()) {
    os << ";groups=";
    for (std::size_t i = 0; i < input_groups.size(); ++i) {
      if (i) os << ",";
      os << input_groups[i];
    }
  }
  for (const auto& h : heads)
    os << ";head:" << h.name << ":" << h.dim << ":" << activation_name(h.act);
  return os.str();
}

std::uint64_t NetworkConfig::arch_hash() const {
  return fnv1a_hash(arch_string());
}

namespace {

Mat init_dense(int rows, int cols, Rng& rng) {
  // He-style scaling off the fan-in.
  const double stddev = std::sqrt(2.0 / static_cast<double>(rows));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = stddev * rng.normal();
  return m;
}

Var apply_activation(Tape& t, Var x, Activation act, double slope) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::leaky_relu: return t.leaky_relu(x, slope);
    case Activation::tanh: return t.tanh(x);
    case Activation::sigmoid: return t.sigmoid(x);
  }
  fail(Errc::config, "unhandled activation");
}

}  // namespace

Network::Network(NetworkConfig cfg) : cfg_(std::move(cfg)) {
  require(cfg_.input_dim >= 1 && cfg_.width >= 1 && cfg_.blocks >= 0,
          Errc::config, "network dimensions must be positive");
  require(!cfg_.heads.empty(), Errc::config, "network needs at least one head");
  if (!cfg_.input_groups.empty()) {
    int total = 0;
    for (int g : cfg_.input_groups) {
      require(g >= 1, Errc::config, "input groups must be positive");
      total += g;
    }
    require(total == cfg_.input_dim, Errc::config,
            "input groups must sum to the input dimension");
  }
  Rng rng = Rng::derive(cfg_.init_seed, 0x6e657477ull);  // per-net stream
  if (cfg_.input_groups.empty()) {
    add_param("in_proj.W", init_dense(cfg_.input_dim, cfg_.width, rng));
  } else {
    // Equal variance per input block.
    Mat w(cfg_.input_dim, cfg_.width);
    const double n_groups = static_cast<double>(cfg_.input_groups.size());
    int row = 0;
    for (int g : cfg_.input_groups) {
      const double stddev = std::sqrt(2.0 / (n_groups * static_cast<double>(g)));
      for (int r = row; r < row + g; ++r)
        for (int c = 0; c < cfg_.width; ++c) w(r, c) = stddev * rng.normal();
      row += g;
    }
    add_param("in_proj.W", std::move(w));
  }
  add_param("in_proj.b", Mat::Zero(1, cfg_.width));
  for (int b = 0; b < cfg_.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    add_param(p + "fc1.W", init_dense(cfg_.width, cfg_.width, rng));
    add_param(p + "fc1.b", Mat::Zero(1, cfg_.width));
    add_param(p + "fc2.W", init_dense(cfg_.width, cfg_.width, rng));
    add_param(p + "fc2.b", Mat::Zero(1, cfg_.width));
  }
  for (const auto& h : cfg_.heads) {
    require(h.dim >= 1, Errc::config, "head dim must be positive");
    add_param("head." + h.name + ".W",
              cfg_.head_init_scale * init_dense(cfg_.width, h.dim, rng));
    add_param("head." + h.name + ".b", Mat::Zero(1, h.dim));
  }
}

void Network::add_param(const std::string& name, Mat value) {
  index_[name] = names_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

Mat& Network::param(const std::string& name) {
  auto it = index_.find(name);
  require(it != index_.end(), Errc::shape_mismatch,
          "no parameter named '" + name + "'");
  return values_[it->second];
}

const Mat& Network::param(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), Errc::shape_mismatch,
          "no parameter named '" + name + "'");
  return values_[it->second];
}

void Network::set_params(const std::vector<Mat>& values) {
  require(values.size() == values_.size(), Errc::shape_mismatch,
          "parameter list size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(values[i].rows() == values_[i].rows() &&
                values[i].cols() == values_[i].cols(),
            Errc::shape_mismatch, "parameter shape mismatch at " + names_[i]);
    values_[i] = values[i];
  }
}

void Network::fold_input_standardization(const Mat& sample_inputs,
                                         double sigma_floor) {
  require(sample_inputs.cols() == cfg_.input_dim, Errc::shape_mismatch,
          "standardization sample width does not match the input layer");
  require(sample_inputs.rows() >= 2, Errc::insufficient_points,
          "need at least two rows to standardize");
  Mat& w = param("in_proj.W");
  Mat& b = param("in_proj.b");
  const Eigen::RowVectorXd mu = sample_inputs.colwise().mean();
  Eigen::RowVectorXd sigma(cfg_.input_dim);
  for (Eigen::Index c = 0; c < sample_inputs.cols(); ++c) {
    const double var =
        (sample_inputs.col(c).array() - mu(c)).square().sum() /
        static_cast<double>(sample_inputs.rows() - 1);
    sigma(c) = std::max(std::sqrt(var), sigma_floor);
  }
  for (Eigen::Index r = 0; r < w.rows(); ++r) w.row(r) /= sigma(r);
  b -= mu * w;
}

BoundNetwork Network::bind(Tape& tape) const {
  BoundNetwork b;
  b.net_ = this;
  b.tape_ = &tape;
  b.param_vars_.reserve(values_.size());
  for (const auto& v : values_) b.param_vars_.push_back(tape.leaf(v));
  return b;
}

std::map<std::string, Var> BoundNetwork::forward(Var x) const {
  const NetworkConfig& cfg = net_->config();
  require(x.cols() == cfg.input_dim, Errc::shape_mismatch,
          "input width " + std::to_string(x.cols()) + " does not match layer in_proj (expects " +
              std::to_string(cfg.input_dim) + ")");
  Tape& t = *tape_;
  auto pv = [&](const std::string& name) -> Var {
    auto it = net_->index_.find(name);
    require(it != net_->index_.end(), Errc::shape_mismatch,
            "no parameter named '" + name + "'");
    return param_vars_[it->second];
  };

  Var h = t.bias_add(t.matmul(x, pv("in_proj.W")), pv("in_proj.b"));
  h = apply_activation(t, h, cfg.hidden_act, cfg.leaky_slope);
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    Var inner = t.bias_add(t.matmul(h, pv(p + "fc1.W")), pv(p + "fc1.b"));
    inner = apply_activation(t, inner, cfg.hidden_act, cfg.leaky_slope);
    inner = t.bias_add(t.matmul(inner, pv(p + "fc2.W")), pv(p + "fc2.b"));
    h = t.add(h, inner);  // skip connection
  }
  std::map<std::string, Var> out;
  for (const auto& spec : cfg.heads) {
    Var y = t.bias_add(t.matmul(h, pv("head." + spec.name + ".W")),
                       pv("head." + spec.name + ".b"));
    out[spec.name] = apply_activation(t, y, spec.act, cfg.leaky_slope);
  }
  return out;
}

std::map<std::string, Mat> Network::forward_values(const Mat& x) const {
  Tape tape;
  BoundNetwork b = bind(tape);
  auto heads = b.forward(tape.leaf(x));
  std::map<std::string, Mat> out;
  for (auto& [name, var] : heads) out[name] = var.value();
  return out;
}

std::uint64_t Network::param_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& v : values_)
    mix(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  return h;
}

}  // namespace dexgrasp
