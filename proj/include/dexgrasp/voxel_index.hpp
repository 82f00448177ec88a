#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dexgrasp/errors.hpp"
#include "dexgrasp/geometry.hpp"

namespace dexgrasp {

/// Uniform voxel grid over a fixed point set for exact nearest-neighbor
/// queries. The search expands Chebyshev shells of cells around the query
/// and stops once the best distance found is provably no worse than
/// anything an unvisited shell could hold, so results match a linear scan
/// exactly (up to floating-point tie order; ties resolve to the lowest
/// point index).
class VoxelIndex {
 public:
  explicit VoxelIndex(const std::vector<Vec3>& points) : points_(points) {
    require(!points.empty(), Errc::insufficient_points,
            "voxel index over empty point set");
    lo_ = hi_ = points[0];
    for (const auto& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    // Aim at a few points per cell.
    const double volume = std::max((hi_ - lo_).prod(), 1e-12);
    const double target = std::cbrt(volume / static_cast<double>(points.size()));
    cell_ = std::max(target, 1e-6);
    for (int a = 0; a < 3; ++a) {
      dims_[a] = std::max<int>(
          1, static_cast<int>(std::floor((hi_[a] - lo_[a]) / cell_)) + 1);
      dims_[a] = std::min(dims_[a], 128);
    }
    // Recompute the cell size so the chosen dims cover the bounding box.
    for (int a = 0; a < 3; ++a)
      cell_ = std::max(cell_, (hi_[a] - lo_[a]) / dims_[a] + 1e-12);

    cells_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], {});
    for (std::size_t i = 0; i < points.size(); ++i)
      cells_[cell_of(points[i])].push_back(static_cast<int>(i));
  }

  /// Index of the nearest point to q and its distance.
  std::pair<int, double> nearest(const Vec3& q) const {
    int ci[3];
    coords_of(q, ci);
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    const int max_shell =
        std::max({dims_[0], dims_[1], dims_[2]}) + 2;
    for (int s = 0;; ++s) {
      // Any point in shell s or beyond is at least (s-1)*cell away.
      const double bound = (s - 1) * cell_;
      if (best >= 0 && bound > 0.0 && best_d2 <= bound * bound) break;
      if (s > max_shell && best >= 0) break;
      scan_shell(q, ci, s, best, best_d2);
      if (s > 3 * max_shell) break;  // q far outside the grid; all cells seen
    }
    return {best, std::sqrt(best_d2)};
  }

 private:
  std::size_t cell_of(const Vec3& p) const {
    int c[3];
    coords_of(p, c);
    return (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
  }

  void coords_of(const Vec3& p, int out[3]) const {
    for (int a = 0; a < 3; ++a) {
      int c = static_cast<int>(std::floor((p[a] - lo_[a]) / cell_));
      out[a] = std::min(std::max(c, 0), dims_[a] - 1);
    }
  }

  void scan_shell(const Vec3& q, const int ci[3], int s, int& best,
                  double& best_d2) const {
    const int x0 = ci[0] - s, x1 = ci[0] + s;
    const int y0 = ci[1] - s, y1 = ci[1] + s;
    const int z0 = ci[2] - s, z1 = ci[2] + s;
    for (int z = z0; z <= z1; ++z) {
      if (z < 0 || z >= dims_[2]) continue;
      for (int y = y0; y <= y1; ++y) {
        if (y < 0 || y >= dims_[1]) continue;
        for (int x = x0; x <= x1; ++x) {
          if (x < 0 || x >= dims_[0]) continue;
          // Only the boundary of the cube belongs to shell s.
          if (s > 0 && x != x0 && x != x1 && y != y0 && y != y1 && z != z0 &&
              z != z1)
            continue;
          const std::size_t idx =
              (static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x;
          for (int pi : cells_[idx]) {
            const double d2 = (points_[static_cast<std::size_t>(pi)] - q).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && pi < best)) {
              best_d2 = d2;
              best = pi;
            }
          }
        }
      }
    }
  }

  const std::vector<Vec3>& points_;
  Vec3 lo_, hi_;
  double cell_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<std::vector<int>> cells_;
};

}  // namespace dexgrasp
