#pragma once

#include <cstdint>
#include <vector>

#include "slowflow/matrix.hpp"

namespace slowflow::ad {

/// Bias-corrected adaptive-moment optimizer state over a fixed list of
/// parameter blocks. Shapes are pinned on the first step.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  std::size_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// One update, in place. `params` and `grads` must align block by block with
/// each other and with the shapes seen on earlier steps.
/// Throws NumericalError naming the block and step if a gradient is non-finite.
void adam_step(AdamState& state, const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads);

}  // namespace slowflow::ad
