#include "slowflow/flow_stack.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "slowflow/errors.hpp"

namespace slowflow::flows {

AffineNorm AffineNorm::identity(std::size_t d) {
  AffineNorm n;
  n.mean = Matrix(1, d);
  n.scale = Matrix(1, d, 1.0);
  return n;
}

AffineNorm AffineNorm::from_data(const Series& x, double min_scale) {
  AffineNorm n;
  n.mean = column_mean(x);
  n.scale = column_std(x);
  for (std::size_t j = 0; j < n.scale.cols(); ++j)
    if (n.scale(0, j) < min_scale) n.scale(0, j) = min_scale;
  return n;
}

bool FlowStack::has_slow() const {
  for (const auto& l : layers)
    if (std::holds_alternative<SlowFlow>(l)) return true;
  return false;
}

std::size_t FlowStack::coupling_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += std::holds_alternative<AffineCoupling>(l) ? 1 : 0;
  return n;
}

FlowStack make_model(std::size_t d, std::size_t n_couplings,
                     const std::vector<std::size_t>& hidden, bool with_slow_layer, Rng& rng,
                     double scale_clamp) {
  FlowStack stack;
  stack.d = d;
  if (with_slow_layer) stack.layers.emplace_back(SlowFlow{});
  for (std::size_t i = 0; i < n_couplings; ++i) {
    stack.layers.emplace_back(make_coupling(d, hidden, i % 2 == 0, rng, scale_clamp));
  }
  stack.layers.emplace_back(AffineNorm::identity(d));
  return stack;
}

void set_norm_from_data(FlowStack& stack, const Series& x) {
  for (auto& l : stack.layers) {
    if (auto* norm = std::get_if<AffineNorm>(&l)) {
      *norm = AffineNorm::from_data(x);
      return;
    }
  }
  throw ContractViolation("set_norm_from_data: stack has no AffineNorm layer");
}

namespace {

void check_width(const FlowStack& stack, const Series& x, const char* op) {
  if (x.cols() != stack.d) {
    throw DimensionError(std::string(op) + ": series width " + std::to_string(x.cols()) +
                         ", stack width " + std::to_string(stack.d));
  }
}

void check_finite(const Series& s, std::size_t layer_index, const char* op) {
  if (!s.all_finite()) {
    throw NumericalError(std::string(op) + ": non-finite values after layer " +
                         std::to_string(layer_index));
  }
}

}  // namespace

EncodeResult encode_with_logdet(const FlowStack& stack, const Series& x) {
  check_width(stack, x, "encode");
  EncodeResult res;
  res.z = x;
  res.logdet_rows.assign(x.rows(), 0.0);
  for (std::size_t i = stack.layers.size(); i-- > 0;) {
    const Layer& layer = stack.layers[i];
    if (std::holds_alternative<SlowFlow>(layer)) {
      res.z = slow_diff(res.z);  // volume preserving, log|det| = 0
    } else if (const auto* norm = std::get_if<AffineNorm>(&layer)) {
      double ld = 0.0;
      for (std::size_t j = 0; j < stack.d; ++j) ld -= std::log(norm->scale(0, j));
      for (std::size_t r = 0; r < res.z.rows(); ++r) {
        for (std::size_t j = 0; j < stack.d; ++j)
          res.z(r, j) = (res.z(r, j) - norm->mean(0, j)) / norm->scale(0, j);
        res.logdet_rows[r] += ld;
      }
    } else {
      auto [z, ld] = coupling_inverse(std::get<AffineCoupling>(layer), res.z);
      res.z = std::move(z);
      for (std::size_t r = 0; r < res.z.rows(); ++r) res.logdet_rows[r] += ld[r];
    }
    check_finite(res.z, i, "encode");
  }
  return res;
}

Series encode(const FlowStack& stack, const Series& x) { return encode_with_logdet(stack, x).z; }

Series decode(const FlowStack& stack, const Series& z) {
  check_width(stack, z, "decode");
  Series x = z;
  for (std::size_t i = 0; i < stack.layers.size(); ++i) {
    const Layer& layer = stack.layers[i];
    if (std::holds_alternative<SlowFlow>(layer)) {
      x = slow_cumsum(x);
    } else if (const auto* norm = std::get_if<AffineNorm>(&layer)) {
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t j = 0; j < stack.d; ++j)
          x(r, j) = x(r, j) * norm->scale(0, j) + norm->mean(0, j);
    } else {
      x = coupling_forward(std::get<AffineCoupling>(layer), x).first;
    }
    check_finite(x, i, "decode");
  }
  return x;
}

std::vector<double> gaussian_logpdf(const Series& z) {
  const double c = -0.5 * static_cast<double>(z.cols()) * std::log(2.0 * std::numbers::pi);
  std::vector<double> out(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double q = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) q += z(r, j) * z(r, j);
    out[r] = c - 0.5 * q;
  }
  return out;
}

double log_likelihood(const FlowStack& stack, const Series& x, bool slow) {
  if (x.rows() == 0) throw ContractViolation("log_likelihood: empty series");
  EncodeResult enc = encode_with_logdet(stack, x);
  const Series base = slow ? slow_diff(enc.z) : enc.z;
  const std::vector<double> prior = gaussian_logpdf(base);
  double acc = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) acc += prior[r] + enc.logdet_rows[r];
  return acc / static_cast<double>(x.rows());
}

std::vector<Matrix*> trainable_params(FlowStack& stack) {
  std::vector<Matrix*> out;
  for (auto& l : stack.layers) {
    if (auto* c = std::get_if<AffineCoupling>(&l)) {
      for (auto* net : {&c->scale_net, &c->shift_net}) {
        for (auto& w : net->weights) out.push_back(&w);
        for (auto& b : net->biases) out.push_back(&b);
      }
    }
  }
  return out;
}

std::vector<const Matrix*> trainable_params(const FlowStack& stack) {
  std::vector<const Matrix*> out;
  for (const auto& l : stack.layers) {
    if (const auto* c = std::get_if<AffineCoupling>(&l)) {
      for (const auto* net : {&c->scale_net, &c->shift_net}) {
        for (const auto& w : net->weights) out.push_back(&w);
        for (const auto& b : net->biases) out.push_back(&b);
      }
    }
  }
  return out;
}

}  // namespace slowflow::flows
