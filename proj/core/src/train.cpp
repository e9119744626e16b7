#include "slowflow/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "slowflow/errors.hpp"

namespace slowflow::flows {

namespace {

Matrix tile_row(const Matrix& row, std::size_t rows) {
  Matrix out(rows, row.cols());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < row.cols(); ++j) out(r, j) = row(0, j);
  return out;
}

Matrix mask_row(const std::vector<std::uint8_t>& mask, bool invert) {
  Matrix row(1, mask.size());
  for (std::size_t j = 0; j < mask.size(); ++j)
    row(0, j) = (mask[j] != 0) == !invert ? 1.0 : 0.0;
  return row;
}

struct CouplingLeaves {
  ad::MlpBinding scale;
  ad::MlpBinding shift;
};

/// Splits the flat leaf list back into per-coupling bindings; the walk order
/// must match trainable_params / bind_params exactly.
std::vector<CouplingLeaves> group_leaves(const FlowStack& stack,
                                         const std::vector<ad::ValueId>& leaves) {
  std::vector<CouplingLeaves> out;
  std::size_t cursor = 0;
  for (const auto& l : stack.layers) {
    const auto* c = std::get_if<AffineCoupling>(&l);
    if (!c) continue;
    CouplingLeaves g;
    for (auto* binding : {&g.scale, &g.shift}) {
      const ad::Mlp& net = binding == &g.scale ? c->scale_net : c->shift_net;
      for (std::size_t i = 0; i < net.weights.size(); ++i) binding->w.push_back(leaves[cursor++]);
      for (std::size_t i = 0; i < net.biases.size(); ++i) binding->b.push_back(leaves[cursor++]);
    }
    out.push_back(std::move(g));
  }
  if (cursor != leaves.size()) throw ContractViolation("group_leaves: leaf count mismatch");
  return out;
}

}  // namespace

std::vector<ad::ValueId> bind_params(ad::Tape& tape, const FlowStack& stack) {
  std::vector<ad::ValueId> leaves;
  for (const Matrix* p : trainable_params(stack)) leaves.push_back(tape.leaf(*p));
  return leaves;
}

ad::ValueId nll_on_tape(ad::Tape& tape, const FlowStack& stack,
                        const std::vector<ad::ValueId>& param_leaves, const Series& x_rows,
                        std::size_t window, bool slow, double* constant_out) {
  if (x_rows.cols() != stack.d) {
    throw DimensionError("nll_on_tape: series width " + std::to_string(x_rows.cols()) +
                         ", stack width " + std::to_string(stack.d));
  }
  if (window == 0 || x_rows.rows() % window != 0) {
    throw ContractViolation("nll_on_tape: rows must stack whole windows");
  }
  const std::size_t n_rows = x_rows.rows();
  const double inv_n = 1.0 / static_cast<double>(n_rows);

  std::vector<CouplingLeaves> bindings = group_leaves(stack, param_leaves);

  ad::ValueId x = tape.leaf(x_rows);
  ad::ValueId logdet_sum;  // invalid until the first coupling
  double constant = 0.5 * static_cast<double>(stack.d) * std::log(2.0 * std::numbers::pi);

  std::size_t coupling_index = stack.coupling_count();
  for (std::size_t i = stack.layers.size(); i-- > 0;) {
    const Layer& layer = stack.layers[i];
    if (std::holds_alternative<SlowFlow>(layer)) {
      x = tape.time_diff(x, window);
    } else if (const auto* norm = std::get_if<AffineNorm>(&layer)) {
      Matrix neg_mean = scale(norm->mean, -1.0);
      Matrix inv_scale(1, stack.d);
      for (std::size_t j = 0; j < stack.d; ++j) {
        inv_scale(0, j) = 1.0 / norm->scale(0, j);
        constant += std::log(norm->scale(0, j));  // minus the per-row log|det|
      }
      x = tape.mul(tape.add_row(x, tape.leaf(std::move(neg_mean))),
                   tape.leaf(tile_row(inv_scale, n_rows)));
    } else {
      const auto& c = std::get<AffineCoupling>(layer);
      const CouplingLeaves& leaves = bindings[--coupling_index];
      ad::ValueId m_tile = tape.leaf(tile_row(mask_row(c.mask, false), n_rows));
      ad::ValueId im_tile = tape.leaf(tile_row(mask_row(c.mask, true), n_rows));
      ad::ValueId xm = tape.mul(x, m_tile);
      ad::ValueId s_raw = ad::apply(tape, leaves.scale, xm);
      ad::ValueId s = tape.scale(tape.tanh(tape.scale(s_raw, 1.0 / c.scale_clamp)), c.scale_clamp);
      ad::ValueId t = ad::apply(tape, leaves.shift, xm);
      ad::ValueId z_active = tape.mul(tape.sub(x, t), tape.exp(tape.scale(s, -1.0)));
      x = tape.add(tape.mul(m_tile, x), tape.mul(im_tile, z_active));
      ad::ValueId ld = tape.scale(tape.sum(tape.mul(im_tile, s)), -1.0);
      logdet_sum = logdet_sum.valid() ? tape.add(logdet_sum, ld) : ld;
    }
  }

  ad::ValueId base = slow ? tape.time_diff(x, window) : x;
  ad::ValueId half_sumsq = tape.scale(tape.sum(tape.square(base)), 0.5);
  ad::ValueId nll = logdet_sum.valid() ? tape.sub(half_sumsq, logdet_sum) : half_sumsq;
  nll = tape.scale(nll, inv_n);
  if (constant_out) *constant_out = constant;
  return nll;
}

TrainReport train(FlowStack& stack, const std::vector<Series>& windows, const TrainConfig& cfg,
                  bool slow) {
  if (windows.empty()) throw ContractViolation("train: no windows");
  const std::size_t window = windows.front().rows();
  for (const auto& w : windows) {
    if (w.cols() != stack.d) throw DimensionError("train: window width differs from stack width");
    if (w.rows() != window) throw ContractViolation("train: windows must share one length");
  }
  if (cfg.epochs == 0) throw ContractViolation("train: zero epochs");

  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = cfg.seed;

  std::vector<Matrix*> params = trainable_params(stack);
  ad::AdamState adam;
  adam.learning_rate = cfg.learning_rate;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.epsilon = cfg.epsilon;

  const std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch_windows, windows.size()));
  const double per_dim = 1.0 / static_cast<double>(stack.d);

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(cfg.seed, 0x5u));

  std::vector<Matrix> snapshot;
  auto take_snapshot = [&] {
    snapshot.clear();
    for (const Matrix* p : params) snapshot.push_back(*p);
  };
  auto restore_snapshot = [&] {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = snapshot[i];
  };
  take_snapshot();

  ad::Tape tape;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < windows.size()) {
      // Fisher-Yates with the run's own generator keeps batches reproducible.
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        const std::size_t j = shuffle_rng.uniform_index(i + 1);
        std::swap(order[i], order[j]);
      }
    }

    double epoch_nll = 0.0;
    std::size_t rows_seen = 0;
    bool failed = false;
    for (std::size_t start = 0; start < order.size() && !failed; start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      std::vector<Series> chunk;
      chunk.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) chunk.push_back(windows[order[k]]);
      const Series x_rows = vstack(chunk);

      tape.clear();
      std::vector<ad::ValueId> leaves = bind_params(tape, stack);
      double constant = 0.0;
      ad::ValueId nll_node = nll_on_tape(tape, stack, leaves, x_rows, window, slow, &constant);
      const double nll = tape.value(nll_node)(0, 0) + constant;
      if (!std::isfinite(nll)) {
        report.diverged = true;
        report.divergence_note = "non-finite NLL at epoch " + std::to_string(epoch + 1);
        failed = true;
        break;
      }
      epoch_nll += nll * static_cast<double>(x_rows.rows());
      rows_seen += x_rows.rows();

      tape.backward(nll_node);
      std::vector<const Matrix*> grads;
      grads.reserve(leaves.size());
      for (ad::ValueId id : leaves) grads.push_back(&tape.grad(id));
      try {
        adam_step(adam, params, grads);
      } catch (const NumericalError& e) {
        report.diverged = true;
        report.divergence_note = e.what();
        failed = true;
        break;
      }
      for (const Matrix* p : params) {
        if (!p->all_finite()) {
          report.diverged = true;
          report.divergence_note = "non-finite parameters at step " + std::to_string(adam.step);
          failed = true;
          break;
        }
      }
    }

    if (failed) {
      restore_snapshot();
      break;
    }
    report.nll_per_epoch.push_back(epoch_nll / static_cast<double>(rows_seen) * per_dim);
    report.epochs_run = epoch + 1;
    take_snapshot();
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace slowflow::flows
