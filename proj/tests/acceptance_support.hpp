#pragma once

// Shared oracles for the acceptance suite. These deliberately avoid the
// library's own code paths: brute-force double loops and finite differences
// only, so they stay independent of what they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "dexgrasp/geometry.hpp"
#include "dexgrasp/rng.hpp"

namespace acceptance {

using dexgrasp::Grasp;
using dexgrasp::Mat3;
using dexgrasp::Rng;
using dexgrasp::Vec3;

inline Mat3 random_rotation(Rng& rng) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  while (axis.norm() < 1e-9) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
  return Eigen::AngleAxisd(rng.uniform(0.0, M_PI), axis.normalized())
      .toRotationMatrix();
}

inline Grasp random_grasp(Rng& rng, double spread = 0.2) {
  Grasp g;
  g.rotation = random_rotation(rng);
  g.translation = Vec3(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                       rng.uniform(-spread, spread));
  for (int i = 0; i < dexgrasp::kJointCount; ++i) g.joints[i] = rng.uniform(0.0, 1.5);
  return g;
}

struct BruteForceMatch {
  std::vector<int> matched;
  std::vector<double> d_transl, d_rot, d_joint;
  double cov = 0.0;
};

/// O(n^2) reference for MAGD matching and coverage, written as a full
/// distance-matrix sweep.
inline BruteForceMatch brute_force_match(const std::vector<Grasp>& gen,
                                         const std::vector<Grasp>& gt) {
  BruteForceMatch out;
  std::set<int> marked;
  for (const auto& g : gen) {
    int arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const double d = (g.translation - gt[j].translation).norm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    out.matched.push_back(arg);
    marked.insert(arg);
    const Grasp& m = gt[static_cast<std::size_t>(arg)];
    out.d_transl.push_back(best);
    const double cosv = std::clamp(
        ((g.rotation.transpose() * m.rotation).trace() - 1.0) / 2.0, -1.0, 1.0);
    out.d_rot.push_back(std::abs(std::acos(cosv)));
    out.d_joint.push_back((g.joints - m.joints).norm());
  }
  out.cov = static_cast<double>(marked.size()) / static_cast<double>(gt.size());
  return out;
}

/// Naive nearest-distance BPS evaluation (double loop).
inline std::vector<double> naive_bps(const std::vector<Vec3>& cloud,
                                     const std::vector<Vec3>& basis) {
  std::vector<double> out;
  out.reserve(basis.size());
  for (const auto& b : basis) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : cloud) best = std::min(best, (b - p).norm());
    out.push_back(best);
  }
  return out;
}

/// Central finite differences over a flat parameter vector accessed via
/// getter/setter callbacks. Returns the max relative error against the
/// supplied analytic gradient.
///
/// Coordinates where the difference quotient itself is inconsistent across
/// step sizes are skipped: there the perturbation crosses a LeakyReLU kink
/// and no finite difference approximates a derivative (the loss is not
/// differentiable at that point). `skipped`, when given, counts them.
inline double max_rel_error_fd(const std::function<double()>& loss,
                               const std::function<double(std::size_t)>& get,
                               const std::function<void(std::size_t, double)>& set,
                               const std::vector<double>& analytic,
                               double h = 1e-5, std::size_t* skipped = nullptr) {
  double worst = 0.0;
  // Central differences carry rounding noise of order eps * |loss| / h.
  // Differences inside 100x that bound are agreement, not error; dividing
  // the absolute tolerance by the 1e-4 relative target yields the floor for
  // the relative-error denominator (rtol/atol form).
  const double base = loss();
  const double fd_noise_floor = std::max(
      1e-6, 1e6 * std::numeric_limits<double>::epsilon() *
                std::max(1.0, std::abs(base)) / h);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double orig = get(i);
    auto at = [&](double delta) {
      set(i, orig + delta);
      const double v = loss();
      set(i, orig);
      return v;
    };
    const double fd = (at(h) - at(-h)) / (2.0 * h);
    const double fd2 = (at(2.0 * h) - at(-2.0 * h)) / (4.0 * h);
    const double denom =
        std::max({std::abs(fd), std::abs(analytic[i]), fd_noise_floor});
    if (std::abs(fd - fd2) > 1e-5 * std::max({std::abs(fd), std::abs(fd2), 1.0})) {
      if (skipped != nullptr) ++*skipped;
      continue;
    }
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace acceptance
