#pragma once

#include <cstdint>

#include "slowflow/matrix.hpp"

namespace slowflow::datagen {

/// Ground-truth generator for the structural-components experiment: one
/// monotone trend, one fixed-frequency seasonal sinusoid and two asynchronous
/// cycles with piecewise-random frequencies, each standardized and then
/// corrupted by additive Gaussian noise.
struct StructuralSpec {
  std::size_t length = 4096;
  /// Trend curvature gamma drawn from [0.1, trend_curvature_max]; the raw
  /// trend is u + gamma u^2 on u in [0,1], strictly monotone.
  double trend_curvature_max = 0.5;
  /// Seasonality period in steps (fixed frequency).
  double season_period = 256.0;
  /// Cycle frequency range, cycles per step.
  double cycle_freq_lo = 1.0 / 96.0;
  double cycle_freq_hi = 1.0 / 24.0;
  /// Mean distance between cycle frequency change-points, steps.
  double cycle_mean_segment = 512.0;
  /// Standard deviation of the additive noise.
  double noise_std = 0.2;
  std::uint64_t seed = 0;
};

/// Spec with the default proportions for a given length (season period T/16).
StructuralSpec default_structural_spec(std::size_t length, std::uint64_t seed);

/// T x 4 sources, columns [trend, season, cycle, cycle].
Series gen_structural(const StructuralSpec& spec);

}  // namespace slowflow::datagen
