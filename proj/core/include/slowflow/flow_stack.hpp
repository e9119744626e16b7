#pragma once

#include <variant>
#include <vector>

#include "slowflow/coupling.hpp"
#include "slowflow/matrix.hpp"
#include "slowflow/rng.hpp"
#include "slowflow/slow_flow.hpp"

namespace slowflow::flows {

/// Fixed per-channel affine layer, generative direction x = z * scale + mean.
/// Data-side normalization; never trained. scale entries must be positive.
struct AffineNorm {
  Matrix mean;   // 1 x d
  Matrix scale;  // 1 x d

  static AffineNorm identity(std::size_t d);
  static AffineNorm from_data(const Series& x, double min_scale = 1e-6);
};

using Layer = std::variant<SlowFlow, AffineNorm, AffineCoupling>;

/// Ordered chain of invertible layers. layers[0] is applied first in the
/// generative direction z -> x; encoding applies the chain in reverse, each
/// layer inverted. A SlowFlow, when present, sits at index 0 so that encoding
/// differences last.
struct FlowStack {
  std::size_t d = 0;
  std::vector<Layer> layers;

  bool has_slow() const;
  std::size_t coupling_count() const;
};

/// Trainable model: optional SlowFlow, then n_couplings alternating-mask
/// couplings, then a data-side AffineNorm (identity until initialized).
FlowStack make_model(std::size_t d, std::size_t n_couplings,
                     const std::vector<std::size_t>& hidden, bool with_slow_layer, Rng& rng,
                     double scale_clamp = 3.0);

/// Replaces the stack's AffineNorm (if any) with channel statistics of x.
void set_norm_from_data(FlowStack& stack, const Series& x);

struct EncodeResult {
  Series z;
  std::vector<double> logdet_rows;  // per-row log|det dz/dx|, all layers
};

/// Inverse chain x -> z with the accumulated per-row log-determinant.
/// Throws NumericalError naming the layer if an intermediate goes non-finite.
EncodeResult encode_with_logdet(const FlowStack& stack, const Series& x);
Series encode(const FlowStack& stack, const Series& x);

/// Generative chain z -> x.
Series decode(const FlowStack& stack, const Series& z);

/// Per-row standard normal log-density: -d/2 log(2 pi) - ||z_t||^2 / 2.
std::vector<double> gaussian_logpdf(const Series& z);

/// Mean per-time-step log-likelihood of x under the stack. With slow = true
/// the prior is evaluated on the temporal increments of the encoded signal
/// instead of the signal itself, which is the differencing layer expressed as
/// a prior (its Jacobian contributes nothing).
double log_likelihood(const FlowStack& stack, const Series& x, bool slow);

/// Parameter blocks of all couplings, in layer order (weights then biases per
/// net, scale net before shift net). AffineNorm and SlowFlow contribute none.
std::vector<Matrix*> trainable_params(FlowStack& stack);
std::vector<const Matrix*> trainable_params(const FlowStack& stack);

}  // namespace slowflow::flows
