#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "slowflow/mlp.hpp"
#include "slowflow/matrix.hpp"
#include "slowflow/rng.hpp"

namespace slowflow::flows {

/// RealNVP-style affine coupling. Coordinates with mask = 1 pass through
/// unchanged and condition the scale/shift networks; coordinates with mask = 0
/// are transformed as y = x * exp(s) + t. The raw log-scale is soft-clamped to
/// [-scale_clamp, scale_clamp] via s -> clamp * tanh(s / clamp).
struct AffineCoupling {
  std::vector<std::uint8_t> mask;  // 1 = pass-through
  ad::Mlp scale_net;
  ad::Mlp shift_net;
  double scale_clamp = 3.0;

  std::size_t width() const { return mask.size(); }
  std::size_t active_count() const;  // transformed coordinates
};

/// Half mask over d coordinates: even_half selects even indices as
/// pass-through. Consecutive layers alternate so every coordinate moves.
std::vector<std::uint8_t> half_mask(std::size_t d, bool even_half);

/// Trainable coupling: conditioner nets d -> hidden... -> d, identity-start
/// (zero final layers).
AffineCoupling make_coupling(std::size_t d, const std::vector<std::size_t>& hidden, bool even_half,
                             Rng& rng, double scale_clamp = 3.0);

/// Frozen random coupling for data mixing. final_scale shrinks the scale-net
/// output layer so the log-determinant stays well conditioned.
AffineCoupling make_random_coupling(std::size_t d, const std::vector<std::size_t>& hidden,
                                    bool even_half, Rng& rng, double sigma_w, double sigma_b,
                                    double scale_final, double scale_clamp = 3.0);

/// Generative direction z -> x. Returns the output and the per-row
/// log|det J| (the sum of active clamped log-scales).
std::pair<Series, std::vector<double>> coupling_forward(const AffineCoupling& layer,
                                                        const Series& z);

/// Exact algebraic inverse x -> z; per-row log|det| is the negation of the
/// forward one at the same point.
std::pair<Series, std::vector<double>> coupling_inverse(const AffineCoupling& layer,
                                                        const Series& x);

}  // namespace slowflow::flows
