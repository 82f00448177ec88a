#include "dexgrasp/pointcloud.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dexgrasp/rng.hpp"
#include "dexgrasp/voxel_index.hpp"

namespace dexgrasp {

Vec3 PointCloud::centroid() const {
  require(!points.empty(), Errc::insufficient_points, "centroid of empty cloud");
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

BpsBasis BpsBasis::generate(int count, std::uint64_t seed) {
  require(count >= 1, Errc::config, "basis size must be >= 1");
  BpsBasis basis;
  basis.seed = seed;
  basis.points.reserve(static_cast<std::size_t>(count));
  Rng rng = Rng::derive(seed, 0x62707362ull);
  while (static_cast<int>(basis.points.size()) < count) {
    const Vec3 p(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                 rng.uniform(-1.0, 1.0));
    if (p.squaredNorm() <= 1.0) basis.points.push_back(p);
  }
  return basis;
}

PointCloud ransac_remove_plane(const PointCloud& cloud, double threshold,
                               int iterations, std::uint64_t seed) {
  require(cloud.size() >= 3, Errc::insufficient_points,
          "plane removal needs at least 3 points");
  require(threshold > 0.0, Errc::config, "threshold must be positive");
  require(iterations >= 1, Errc::config, "iterations must be >= 1");

  Rng rng = Rng::derive(seed, 0x706c6e65ull);
  const auto n = cloud.size();
  Vec3 best_n = Vec3::UnitZ();
  double best_d = 0.0;
  std::size_t best_support = 0;
  bool found = false;
  for (int it = 0; it < iterations; ++it) {
    const auto i = rng.uniform_int(n);
    const auto j = rng.uniform_int(n);
    const auto k = rng.uniform_int(n);
    if (i == j || j == k || i == k) continue;
    const Vec3 a = cloud.points[i], b = cloud.points[j], c = cloud.points[k];
    Vec3 normal = (b - a).cross(c - a);
    const double nn = normal.norm();
    if (nn < 1e-12) continue;  // collinear sample
    normal /= nn;
    const double d = normal.dot(a);
    std::size_t support = 0;
    for (const auto& p : cloud.points)
      if (std::abs(normal.dot(p) - d) <= threshold) ++support;
    if (!found || support > best_support) {
      found = true;
      best_support = support;
      best_n = normal;
      best_d = d;
    }
  }
  require(found, Errc::no_plane_found,
          "no non-degenerate plane hypothesis found");

  PointCloud out;
  const bool has_mask = !cloud.mask.empty();
  for (std::size_t idx = 0; idx < n; ++idx) {
    const auto& p = cloud.points[idx];
    if (std::abs(best_n.dot(p) - best_d) > threshold) {
      out.points.push_back(p);
      if (has_mask) out.mask.push_back(cloud.mask[idx]);
    }
  }
  require(!out.points.empty(), Errc::empty_result,
          "every point lies on the dominant plane");
  return out;
}

std::pair<PointCloud, Vec3> normalize_to_centroid(const PointCloud& cloud) {
  const Vec3 c = cloud.centroid();
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(p - c);
  out.mask = cloud.mask;
  return {std::move(out), c};
}

BpsFeature bps_encode(const PointCloud& cloud, const BpsBasis& basis) {
  require(!cloud.empty(), Errc::insufficient_points, "bps encode of empty cloud");
  BpsFeature f;
  f.distances.reserve(basis.points.size());
  VoxelIndex index(cloud.points);
  for (const auto& b : basis.points)
    f.distances.push_back(index.nearest(b).second);
  return f;
}

BpsFeature encode_scene_cloud(const PointCloud& cloud, const BpsBasis& basis,
                              double scale) {
  require(scale > 0.0, Errc::config, "cloud scale must be positive");
  auto [centered, centroid] = normalize_to_centroid(cloud);
  for (auto& p : centered.points) p /= scale;
  BpsFeature f = bps_encode(centered, basis);
  f.centroid_offset = centroid;
  f.scale = scale;
  return f;
}

PointCloud crop_by_mask(const PointCloud& cloud,
                        const std::vector<std::uint8_t>& mask) {
  require(mask.size() == cloud.size(), Errc::shape_mismatch,
          "mask length does not match cloud size");
  PointCloud out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.points.push_back(cloud.points[i]);
  require(!out.points.empty(), Errc::empty_part, "mask selects no points");
  return out;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  require(f != nullptr, Errc::io, "cannot open '" + path.string() + "' for write");
  std::fprintf(f,
               "ply\nformat ascii 1.0\nelement vertex %zu\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n",
               cloud.size());
  for (const auto& p : cloud.points)
    std::fprintf(f, "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
  std::fclose(f);
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(is.good(), Errc::io, "cannot open '" + path.string() + "'");
  std::string line;
  std::getline(is, line);
  require(line == "ply", Errc::io, "not a PLY file: " + path.string());
  std::size_t count = 0;
  bool ascii = false;
  while (std::getline(is, line)) {
    if (line.rfind("format ascii", 0) == 0) ascii = true;
    if (line.rfind("element vertex ", 0) == 0)
      count = static_cast<std::size_t>(std::stoull(line.substr(15)));
    if (line == "end_header") break;
  }
  require(ascii, Errc::io, "only ascii PLY is supported");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec3 p;
    is >> p.x() >> p.y() >> p.z();
    require(static_cast<bool>(is), Errc::io, "truncated PLY vertex list");
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_cloud_f32(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), Errc::io, "cannot open '" + path.string() + "' for write");
  const std::uint64_t n = cloud.size();
  unsigned char hdr[8];
  for (int i = 0; i < 8; ++i) hdr[i] = static_cast<unsigned char>((n >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(hdr), 8);
  for (const auto& p : cloud.points) {
    for (int a = 0; a < 3; ++a) {
      const float v = static_cast<float>(p[a]);
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      unsigned char buf[4];
      for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
      os.write(reinterpret_cast<const char*>(buf), 4);
    }
  }
  require(os.good(), Errc::io, "write failed: " + path.string());
}

PointCloud read_cloud_f32(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), Errc::io, "cannot open '" + path.string() + "'");
  unsigned char hdr[8];
  is.read(reinterpret_cast<char*>(hdr), 8);
  require(static_cast<bool>(is), Errc::io, "truncated header: " + path.string());
  std::uint64_t n = 0;
  for (int i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(hdr[i]) << (8 * i);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::uint64_t r = 0; r < n; ++r) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      unsigned char buf[4];
      is.read(reinterpret_cast<char*>(buf), 4);
      require(static_cast<bool>(is), Errc::io, "truncated payload: " + path.string());
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
      float v;
      std::memcpy(&v, &bits, 4);
      p[a] = static_cast<double>(v);
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_bps_f32(const std::filesystem::path& path, const BpsFeature& f) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), Errc::io, "cannot open '" + path.string() + "' for write");
  for (double d : f.distances) {
    const float v = static_cast<float>(d);
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 4);
  }
  require(os.good(), Errc::io, "write failed: " + path.string());
}

std::vector<double> read_bps_f32(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  require(is.good(), Errc::io, "cannot open '" + path.string() + "'");
  const auto bytes = static_cast<std::size_t>(is.tellg());
  require(bytes % 4 == 0, Errc::io, "bps file size not a multiple of 4");
  is.seekg(0);
  std::vector<double> out;
  out.reserve(bytes / 4);
  for (std::size_t r = 0; r < bytes / 4; ++r) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    out.push_back(static_cast<double>(v));
  }
  return out;
}

}  // namespace dexgrasp
