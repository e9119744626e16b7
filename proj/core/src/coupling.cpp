#include "slowflow/coupling.hpp"

#include <cmath>
#include <string>

#include "slowflow/errors.hpp"

namespace slowflow::flows {

namespace {

void require_width(const AffineCoupling& layer, const Series& x, const char* op) {
  if (x.cols() != layer.width()) {
    throw DimensionError(std::string(op) + ": series width " + std::to_string(x.cols()) +
                         ", coupling width " + std::to_string(layer.width()));
  }
}

void require_valid_mask(const std::vector<std::uint8_t>& mask) {
  bool any_pass = false, any_active = false;
  for (auto m : mask) (m ? any_pass : any_active) = true;
  if (!any_pass || !any_active) {
    throw ContractViolation("coupling mask needs at least one pass-through and one active entry");
  }
}

double soft_clamp(double s, double c) { return c * std::tanh(s / c); }

/// Copy of x with active (transformed) coordinates zeroed; conditioner input.
Series masked_input(const AffineCoupling& layer, const Series& x) {
  Series xm = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (!layer.mask[j]) xm(i, j) = 0.0;
  return xm;
}

}  // namespace

std::size_t AffineCoupling::active_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m ? 0 : 1;
  return n;
}

std::vector<std::uint8_t> half_mask(std::size_t d, bool even_half) {
  if (d < 2) throw ContractViolation("half_mask: need width >= 2");
  std::vector<std::uint8_t> mask(d);
  for (std::size_t j = 0; j < d; ++j) mask[j] = ((j % 2 == 0) == even_half) ? 1 : 0;
  return mask;
}

AffineCoupling make_coupling(std::size_t d, const std::vector<std::size_t>& hidden, bool even_half,
                             Rng& rng, double scale_clamp) {
  AffineCoupling layer;
  layer.mask = half_mask(d, even_half);
  std::vector<std::size_t> sizes;
  sizes.push_back(d);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(d);
  layer.scale_net = ad::Mlp::glorot(sizes, rng, 0.0);
  layer.shift_net = ad::Mlp::glorot(sizes, rng, 0.0);
  layer.scale_clamp = scale_clamp;
  return layer;
}

AffineCoupling make_random_coupling(std::size_t d, const std::vector<std::size_t>& hidden,
                                    bool even_half, Rng& rng, double sigma_w, double sigma_b,
                                    double scale_final, double scale_clamp) {
  AffineCoupling layer;
  layer.mask = half_mask(d, even_half);
  std::vector<std::size_t> sizes;
  sizes.push_back(d);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(d);
  layer.scale_net = ad::Mlp::gaussian(sizes, rng, sigma_w, sigma_b, scale_final);
  layer.shift_net = ad::Mlp::gaussian(sizes, rng, sigma_w, sigma_b, 1.0);
  layer.scale_clamp = scale_clamp;
  return layer;
}

std::pair<Series, std::vector<double>> coupling_forward(const AffineCoupling& layer,
                                                        const Series& z) {
  require_width(layer, z, "coupling_forward");
  require_valid_mask(layer.mask);
  const Series zm = masked_input(layer, z);
  const Matrix s_raw = layer.scale_net.apply(zm);
  const Matrix t = layer.shift_net.apply(zm);

  Series x = z;
  std::vector<double> logdet(z.rows(), 0.0);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) {
      if (layer.mask[j]) continue;
      const double s = soft_clamp(s_raw(i, j), layer.scale_clamp);
      x(i, j) = z(i, j) * std::exp(s) + t(i, j);
      logdet[i] += s;
    }
  }
  return {std::move(x), std::move(logdet)};
}

std::pair<Series, std::vector<double>> coupling_inverse(const AffineCoupling& layer,
                                                        const Series& x) {
  require_width(layer, x, "coupling_inverse");
  require_valid_mask(layer.mask);
  // Pass-through coordinates are identical in x and z, so the conditioners
  // see the same input as in the forward direction.
  const Series xm = masked_input(layer, x);
  const Matrix s_raw = layer.scale_net.apply(xm);
  const Matrix t = layer.shift_net.apply(xm);

  Series z = x;
  std::vector<double> logdet(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (layer.mask[j]) continue;
      const double s = soft_clamp(s_raw(i, j), layer.scale_clamp);
      z(i, j) = (x(i, j) - t(i, j)) * std::exp(-s);
      logdet[i] -= s;
    }
  }
  return {std::move(z), std::move(logdet)};
}

}  // namespace slowflow::flows
