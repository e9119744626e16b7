#include "slowflow/mlp.hpp"

#include <cmath>

#include "slowflow/errors.hpp"

namespace slowflow::ad {

namespace {

Mlp build_shell(std::vector<std::size_t> sizes) {
  if (sizes.size() < 2) throw ContractViolation("Mlp: need at least input and output sizes");
  for (std::size_t s : sizes)
    if (s == 0) throw ContractViolation("Mlp: zero-width layer");
  Mlp net;
  net.layer_sizes = std::move(sizes);
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    net.weights.emplace_back(net.layer_sizes[l], net.layer_sizes[l + 1]);
    net.biases.emplace_back(1, net.layer_sizes[l + 1]);
  }
  return net;
}

}  // namespace

Mlp Mlp::glorot(std::vector<std::size_t> sizes, Rng& rng, double final_scale) {
  Mlp net = build_shell(std::move(sizes));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const bool last = l + 1 == net.weights.size();
    const double sd =
        (last ? final_scale : 1.0) / std::sqrt(static_cast<double>(net.layer_sizes[l]));
    for (std::size_t k = 0; k < net.weights[l].size(); ++k)
      net.weights[l].data()[k] = sd == 0.0 ? 0.0 : rng.normal(0.0, sd);
  }
  return net;
}

Mlp Mlp::gaussian(std::vector<std::size_t> sizes, Rng& rng, double sigma_w, double sigma_b,
                  double final_scale) {
  Mlp net = build_shell(std::move(sizes));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const bool last = l + 1 == net.weights.size();
    const double sw = sigma_w * (last ? final_scale : 1.0);
    for (std::size_t k = 0; k < net.weights[l].size(); ++k)
      net.weights[l].data()[k] = sw == 0.0 ? 0.0 : rng.normal(0.0, sw);
    for (std::size_t k = 0; k < net.biases[l].size(); ++k)
      net.biases[l].data()[k] = sigma_b == 0.0 ? 0.0 : rng.normal(0.0, sigma_b);
  }
  return net;
}

Matrix Mlp::apply(const Matrix& x) const {
  if (x.cols() != layer_sizes.front()) {
    throw DimensionError("Mlp::apply: input width " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(layer_sizes.front()));
  }
  Matrix h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = add_row(matmul(h, weights[l]), biases[l]);
    if (l + 1 < weights.size()) h = map_tanh(h);
  }
  return h;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

bool Mlp::all_finite() const {
  for (const auto& w : weights)
    if (!w.all_finite()) return false;
  for (const auto& b : biases)
    if (!b.all_finite()) return false;
  return true;
}

MlpBinding bind(Tape& tape, const Mlp& net) {
  MlpBinding binding;
  for (const auto& w : net.weights) binding.w.push_back(tape.leaf(w));
  for (const auto& b : net.biases) binding.b.push_back(tape.leaf(b));
  return binding;
}

ValueId apply(Tape& tape, const MlpBinding& net, ValueId x) {
  ValueId h = x;
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    h = tape.add_row(tape.matmul(h, net.w[l]), net.b[l]);
    if (l + 1 < net.w.size()) h = tape.tanh(h);
  }
  return h;
}

}  // namespace slowflow::ad
