#pragma once

#include <stdexcept>
#include <string>

namespace dexgrasp {

enum class Errc {
  invalid_rotation,
  degenerate_parameterization,
  invalid_grasp,
  insufficient_points,
  no_plane_found,
  empty_result,
  empty_part,
  part_not_found,
  empty_batch,
  shape_mismatch,
  no_grasp_found,
  generation,
  single_class,
  nan_loss,
  checkpoint,
  config,
  oracle,
  io,
};

/// All recoverable failures carry a category so callers (and the CLI exit
/// code mapping) can react without parsing message strings.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(name(code)) + ": " + msg), code_(code) {}

  Errc code() const { return code_; }

  static const char* name(Errc c) {
    switch (c) {
      case Errc::invalid_rotation: return "invalid-rotation";
      case Errc::degenerate_parameterization: return "degenerate-parameterization";
      case Errc::invalid_grasp: return "invalid-grasp";
      case Errc::insufficient_points: return "insufficient-points";
      case Errc::no_plane_found: return "no-plane-found";
      case Errc::empty_result: return "empty-result";
      case Errc::empty_part: return "empty-part";
      case Errc::part_not_found: return "part-not-found";
      case Errc::empty_batch: return "empty-batch";
      case Errc::shape_mismatch: return "shape-mismatch";
      case Errc::no_grasp_found: return "no-grasp-found";
      case Errc::generation: return "generation";
      case Errc::single_class: return "single-class";
      case Errc::nan_loss: return "nan-loss";
      case Errc::checkpoint: return "checkpoint";
      case Errc::config: return "config";
      case Errc::oracle: return "oracle";
      case Errc::io: return "io";
    }
    return "unknown";
  }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, Errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace dexgrasp
