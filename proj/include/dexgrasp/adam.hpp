#pragma once

#include <cstdint>
#include <vector>

#include "dexgrasp/errors.hpp"
#include "dexgrasp/tape.hpp"

namespace dexgrasp {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  std::int64_t t = 0;

  static AdamState zeros_like(const std::vector<Mat>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
      s.m.push_back(Mat::Zero(p.rows(), p.cols()));
      s.v.push_back(Mat::Zero(p.rows(), p.cols()));
    }
    return s;
  }
};

/// One Adam update with bias correction, in place.
inline void adam_step(std::vector<Mat>& params, const std::vector<Mat>& grads,
                      AdamState& state, const AdamConfig& cfg) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          Errc::shape_mismatch, "adam_step: parameter/gradient count mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].rows() == grads[i].rows() &&
                params[i].cols() == grads[i].cols(),
            Errc::shape_mismatch, "adam_step: shape mismatch");
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i].array().matrix() +
                 (1.0 - cfg.beta2) * grads[i].array().square().matrix();
    const Mat m_hat = state.m[i] / bc1;
    const Mat v_hat = state.v[i] / bc2;
    params[i].array() -=
        cfg.lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
  }
}

}  // namespace dexgrasp
