#include "dexgrasp/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace dexgrasp {

namespace {

constexpr char kMagic[4] = {'D', 'X', 'G', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  require(static_cast<bool>(is), Errc::checkpoint, "truncated checkpoint file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  write_le<std::uint64_t>(os, bits);
}

double read_f64(std::istream& is) {
  const std::uint64_t bits = read_le<std::uint64_t>(is);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

void write_string(std::ostream& os, const std::string& s) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const auto len = read_le<std::uint32_t>(is);
  require(len <= (1u << 20), Errc::checkpoint, "implausible string length");
  std::string s(len, '\0');
  is.read(s.data(), len);
  require(static_cast<bool>(is), Errc::checkpoint, "truncated checkpoint file");
  return s;
}

void write_tensor(std::ostream& os, const std::string& name, const Mat& m) {
  write_string(os, name);
  write_le<std::uint32_t>(os, 2);
  write_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  write_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(os, m(r, c));
}

std::pair<std::string, Mat> read_tensor(std::istream& is) {
  std::string name = read_string(is);
  const auto rank = read_le<std::uint32_t>(is);
  require(rank == 2, Errc::checkpoint, "only rank-2 tensors are stored");
  const auto rows = read_le<std::uint64_t>(is);
  const auto cols = read_le<std::uint64_t>(is);
  require(rows <= (1ull << 24) && cols <= (1ull << 24), Errc::checkpoint,
          "implausible tensor dims");
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_f64(is);
  return {std::move(name), std::move(m)};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const CheckpointMeta& meta, const AdamState* opt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), Errc::io, "cannot open '" + path.string() + "' for write");
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kVersion);
  write_le<std::uint64_t>(os, net.config().arch_hash());
  write_string(os, net.config().arch_string());
  write_string(os, meta.provenance);
  write_le<std::uint64_t>(os, meta.epoch);
  for (std::uint64_t w : meta.rng_state) write_le<std::uint64_t>(os, w);

  const auto& names = net.param_names();
  const auto& values = net.param_values();
  std::uint64_t n_tensors = names.size();
  if (opt != nullptr) n_tensors += 2 * names.size() + 1;
  write_le<std::uint64_t>(os, n_tensors);
  for (std::size_t i = 0; i < names.size(); ++i)
    write_tensor(os, names[i], values[i]);
  if (opt != nullptr) {
    require(opt->m.size() == names.size(), Errc::checkpoint,
            "optimizer state does not match parameter list");
    for (std::size_t i = 0; i < names.size(); ++i)
      write_tensor(os, "adam.m." + names[i], opt->m[i]);
    for (std::size_t i = 0; i < names.size(); ++i)
      write_tensor(os, "adam.v." + names[i], opt->v[i]);
    Mat t(1, 1);
    t(0, 0) = static_cast<double>(opt->t);
    write_tensor(os, "adam.t", t);
  }
  os.flush();
  require(os.good(), Errc::io, "write to '" + path.string() + "' failed");
}

NetworkConfig parse_arch_string(const std::string& arch) {
  NetworkConfig cfg;
  cfg.heads.clear();
  std::istringstream is(arch);
  std::string tok;
  while (std::getline(is, tok, ';')) {
    const auto colon = tok.find(':');
    const auto eq = tok.find('=');
    if (tok.rfind("head:", 0) == 0) {
      std::istringstream hs(tok.substr(5));
      HeadSpec h;
      std::string dim, act;
      std::getline(hs, h.name, ':');
      std::getline(hs, dim, ':');
      std::getline(hs, act, ':');
      h.dim = std::stoi(dim);
      h.act = activation_from_name(act);
      cfg.heads.push_back(std::move(h));
    } else if (eq != std::string::npos) {
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "in") cfg.input_dim = std::stoi(val);
      else if (key == "width") cfg.width = std::stoi(val);
      else if (key == "blocks") cfg.blocks = std::stoi(val);
      else if (key == "act") cfg.hidden_act = activation_from_name(val);
      else if (key == "slope") cfg.leaky_slope = std::stod(val);
      else if (key == "groups") {
        cfg.input_groups.clear();
        std::istringstream gs(val);
        std::string item;
        while (std::getline(gs, item, ','))
          cfg.input_groups.push_back(std::stoi(item));
      }
      else fail(Errc::checkpoint, "unknown arch field '" + key + "'");
    } else {
      (void)colon;
      fail(Errc::checkpoint, "malformed arch token '" + tok + "'");
    }
  }
  require(!cfg.heads.empty(), Errc::checkpoint, "arch string has no heads");
  return cfg;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::optional<std::uint64_t> required_arch_hash) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), Errc::io, "cannot open '" + path.string() + "'");
  char magic[4];
  is.read(magic, 4);
  require(static_cast<bool>(is) && std::memcmp(magic, kMagic, 4) == 0,
          Errc::checkpoint, "bad magic in '" + path.string() + "'");
  const auto version = read_le<std::uint32_t>(is);
  require(version == kVersion, Errc::checkpoint,
          "unsupported checkpoint version " + std::to_string(version));
  const auto arch_hash = read_le<std::uint64_t>(is);
  if (required_arch_hash && *required_arch_hash != arch_hash) {
    fail(Errc::checkpoint,
         "checkpoint arch hash mismatch (refusing to load): stored " +
             std::to_string(arch_hash) + " expected " +
             std::to_string(*required_arch_hash));
  }
  const std::string arch = read_string(is);

  LoadedCheckpoint out;
  out.meta.provenance = read_string(is);
  out.meta.epoch = read_le<std::uint64_t>(is);
  for (auto& w : out.meta.rng_state) w = read_le<std::uint64_t>(is);

  NetworkConfig cfg = parse_arch_string(arch);
  require(cfg.arch_hash() == arch_hash, Errc::checkpoint,
          "stored arch string does not hash to stored arch hash");
  out.net = Network(cfg);

  const auto n_tensors = read_le<std::uint64_t>(is);
  require(n_tensors <= (1ull << 20), Errc::checkpoint, "implausible tensor count");
  std::size_t params_loaded = 0;
  AdamState opt;
  bool saw_adam = false;
  std::vector<std::pair<std::string, Mat>> adam_m, adam_v;
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    auto [name, value] = read_tensor(is);
    if (name.rfind("adam.m.", 0) == 0) {
      adam_m.emplace_back(name.substr(7), std::move(value));
      saw_adam = true;
    } else if (name.rfind("adam.v.", 0) == 0) {
      adam_v.emplace_back(name.substr(7), std::move(value));
      saw_adam = true;
    } else if (name == "adam.t") {
      opt.t = static_cast<std::int64_t>(value(0, 0));
      saw_adam = true;
    } else {
      Mat& p = out.net.param(name);
      require(p.rows() == value.rows() && p.cols() == value.cols(),
              Errc::checkpoint, "tensor shape mismatch for '" + name + "'");
      p = std::move(value);
      ++params_loaded;
    }
  }
  require(params_loaded == out.net.param_names().size(), Errc::checkpoint,
          "checkpoint missing parameter tensors");
  if (saw_adam) {
    const auto& names = out.net.param_names();
    require(adam_m.size() == names.size() && adam_v.size() == names.size(),
            Errc::checkpoint, "incomplete optimizer state");
    opt.m.resize(names.size());
    opt.v.resize(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      require(adam_m[i].first == names[i] && adam_v[i].first == names[i],
              Errc::checkpoint, "optimizer state order mismatch");
      opt.m[i] = std::move(adam_m[i].second);
      opt.v[i] = std::move(adam_v[i].second);
    }
    out.opt = std::move(opt);
    out.has_opt = true;
  }
  return out;
}

}  // namespace dexgrasp
