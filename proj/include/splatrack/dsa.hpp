#pragma once

#include <cmath>

#include "splatrack/errors.hpp"

namespace splatrack {

/// Displacement-adaptive schedule parameters. lr_base applies at the
/// reference (minimal-displacement) frame; each frame's initial rate scales
/// linearly with its displacement ratio, decays exponentially within the
/// frame down to decay_floor_ratio, and the iteration budget is extended by
/// the same ratio up to iter_cap_multiplier.
struct DsaConfig {
  double lr_base = 1.0e-3;
  int iter_base = 1000;
  double decay_floor_ratio = 0.01;
  double iter_cap_multiplier = 4.0;
};

/// Initial learning rate for a frame: lr_base * prev_displacement /
/// min_displacement. A zero prev_displacement is the no-history sentinel and
/// yields lr_base.
inline double lr_init_for_frame(double prev_displacement, double min_displacement,
                                const DsaConfig& cfg) {
  if (prev_displacement < 0.0) {
    throw InvalidInputError("lr_init_for_frame: negative displacement");
  }
  if (!(min_displacement > 0.0)) {
    throw InvalidInputError("lr_init_for_frame: min_displacement must be positive");
  }
  if (prev_displacement == 0.0) return cfg.lr_base;
  return cfg.lr_base * (prev_displacement / min_displacement);
}

/// Exponential decay within a frame: lr_init * floor^(i / (total-1)).
/// i = 0 gives lr_init, i = total-1 gives lr_init * floor; total = 1 gives
/// lr_init.
inline double lr_at_iteration(double lr_init, int i, int total, const DsaConfig& cfg) {
  if (i < 0 || i >= total) {
    throw InvalidInputError("lr_at_iteration: iteration out of range");
  }
  if (total == 1) return lr_init;
  return lr_init * std::pow(cfg.decay_floor_ratio,
                            static_cast<double>(i) / static_cast<double>(total - 1));
}

/// Iteration budget: round(iter_base * min(ratio, cap)), never below iter_base.
inline int iterations_for_frame(double displacement, double min_displacement,
                                const DsaConfig& cfg) {
  if (displacement < 0.0) {
    throw InvalidInputError("iterations_for_frame: negative displacement");
  }
  if (!(min_displacement > 0.0)) {
    throw InvalidInputError("iterations_for_frame: min_displacement must be positive");
  }
  const double ratio =
      std::min(displacement / min_displacement, cfg.iter_cap_multiplier);
  const long scaled = std::lround(cfg.iter_base * ratio);
  return static_cast<int>(std::max<long>(scaled, cfg.iter_base));
}

}  // namespace splatrack
