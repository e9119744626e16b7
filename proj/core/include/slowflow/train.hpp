#pragma once

#include <cstdint>
#include <vector>

#include "slowflow/adam.hpp"
#include "slowflow/flow_stack.hpp"
#include "slowflow/matrix.hpp"
#include "slowflow/tape.hpp"

namespace slowflow::flows {

struct TrainConfig {
  std::size_t epochs = 400;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Windows per optimizer step; one step per epoch when it covers the data.
  std::size_t batch_windows = 16;
  std::uint64_t seed = 0;
};

struct TrainReport {
  /// Negative log-likelihood in nats per time step per dimension.
  std::vector<double> nll_per_epoch;
  std::size_t epochs_run = 0;
  bool diverged = false;
  std::string divergence_note;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

/// Exact NLL of a window batch as a tape graph. `x_rows` stacks whole windows
/// of length `window` on top of each other; the couplings act row-wise and the
/// slow prior differences each window independently. Returns the scalar node
/// whose value is mean NLL per time step (AffineNorm's constant log|det| share
/// included via `constant_out`).
ad::ValueId nll_on_tape(ad::Tape& tape, const FlowStack& stack,
                        const std::vector<ad::ValueId>& param_leaves, const Series& x_rows,
                        std::size_t window, bool slow, double* constant_out);

/// Pushes every trainable parameter as a tape leaf, in trainable_params order.
std::vector<ad::ValueId> bind_params(ad::Tape& tape, const FlowStack& stack);

/// Maximizes the mean log-likelihood of the windows by full- or mini-batch
/// Adam. Deterministic given the config seed. On divergence the stack is
/// rolled back to the last finite epoch and the report says so.
TrainReport train(FlowStack& stack, const std::vector<Series>& windows, const TrainConfig& cfg,
                  bool slow);

}  // namespace slowflow::flows
