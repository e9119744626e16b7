#pragma once

#include <cstdint>

#include "slowflow/flow_stack.hpp"
#include "slowflow/matrix.hpp"

namespace slowflow::datagen {

struct MixingOptions {
  std::vector<std::size_t> hidden = {16, 16};
  /// Weight scale of the random conditioner nets; 0 is the identity-mixing
  /// test hook (biases forced to zero too).
  double sigma_w = 0.8;
  double sigma_b = 0.3;
  /// Extra shrink on the scale-net output layer; keeps per-row log|det|
  /// within the conditioning bound without flattening the shift nets.
  double scale_final = 0.2;
  double scale_clamp = 3.0;
  std::size_t probe_rows = 2048;
  std::size_t max_tries = 100;
};

/// Frozen, randomly initialized coupling stack used as the nonlinear mixing
/// function. Never trained.
struct MixingModel {
  flows::FlowStack stack;
  std::uint64_t seed = 0;
  /// Conditioning report: per-row log|det| range over standard-normal probes.
  double logdet_min = 0.0;
  double logdet_max = 0.0;
  std::size_t tries = 1;
};

/// Draws coupling weights N(0, sigma_w^2) and rejection-resamples (shrinking
/// sigma_w gently) until every probe row's log|det| lies in [-d, d]. Throws
/// after max_tries with the advice to lower the depth.
MixingModel make_mixing(std::size_t d, std::size_t depth, std::uint64_t seed,
                        const MixingOptions& opts = {});

/// Fraction of observed variance a least-squares linear fit on the sources
/// cannot explain. Mixing is accepted as genuinely nonlinear when > 0.05.
double linear_residual_fraction(const Series& sources, const Series& observed);

}  // namespace slowflow::datagen
