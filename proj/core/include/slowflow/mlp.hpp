#pragma once

#include <cstdint>
#include <vector>

#include "slowflow/matrix.hpp"
#include "slowflow/rng.hpp"
#include "slowflow/tape.hpp"

namespace slowflow::ad {

/// Feed-forward network, tanh on hidden layers, identity on the output.
/// Weights are [in x out] so rows of the input map straight through matmul.
struct Mlp {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;  // 1 x out each

  /// Hidden layers N(0, 1/sqrt(fan_in)); the output layer is scaled by
  /// final_scale (0 gives an identity-start network). Biases zero.
  static Mlp glorot(std::vector<std::size_t> sizes, Rng& rng, double final_scale = 0.0);

  /// All weights N(0, sigma_w), biases N(0, sigma_b); the output layer
  /// additionally scaled by final_scale. Used for frozen random mixers.
  static Mlp gaussian(std::vector<std::size_t> sizes, Rng& rng, double sigma_w, double sigma_b,
                      double final_scale = 1.0);

  Matrix apply(const Matrix& x) const;

  std::size_t param_count() const;
  bool all_finite() const;
};

/// Tape handles for one Mlp's parameters, pushed as leaves for one step.
struct MlpBinding {
  std::vector<ValueId> w;
  std::vector<ValueId> b;
};

MlpBinding bind(Tape& tape, const Mlp& net);
ValueId apply(Tape& tape, const MlpBinding& net, ValueId x);

}  // namespace slowflow::ad
