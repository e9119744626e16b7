#include "slowflow/mixing.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "slowflow/errors.hpp"
#include "slowflow/rng.hpp"

namespace slowflow::datagen {

MixingModel make_mixing(std::size_t d, std::size_t depth, std::uint64_t seed,
                        const MixingOptions& opts) {
  if (depth < 2) throw ContractViolation("make_mixing: depth must be >= 2");
  if (d < 2) throw ContractViolation("make_mixing: need at least 2 channels");

  const double bound = static_cast<double>(d);
  double sigma_w = opts.sigma_w;
  const bool identity_hook = opts.sigma_w == 0.0;

  for (std::size_t attempt = 0; attempt < opts.max_tries; ++attempt) {
    Rng rng(derive_seed(seed, 0x100 + attempt));
    MixingModel model;
    model.seed = seed;
    model.tries = attempt + 1;
    model.stack.d = d;
    for (std::size_t i = 0; i < depth; ++i) {
      model.stack.layers.emplace_back(flows::make_random_coupling(
          d, opts.hidden, i % 2 == 0, rng, sigma_w, identity_hook ? 0.0 : opts.sigma_b,
          opts.scale_final, opts.scale_clamp));
    }

    // Conditioning probe: per-row log|det| of the generative map on
    // standard-normal inputs must stay within +-d nats.
    Series probe = rng.normal_matrix(opts.probe_rows, d);
    std::vector<double> logdet(opts.probe_rows, 0.0);
    Series x = probe;
    for (const auto& layer : model.stack.layers) {
      auto [next, ld] = flows::coupling_forward(std::get<flows::AffineCoupling>(layer), x);
      x = std::move(next);
      for (std::size_t r = 0; r < logdet.size(); ++r) logdet[r] += ld[r];
    }
    model.logdet_min = logdet[0];
    model.logdet_max = logdet[0];
    for (double v : logdet) {
      model.logdet_min = std::min(model.logdet_min, v);
      model.logdet_max = std::max(model.logdet_max, v);
    }
    if (model.logdet_min >= -bound && model.logdet_max <= bound) return model;
    sigma_w *= 0.93;
  }
  throw NumericalError("make_mixing: no well-conditioned draw in " +
                       std::to_string(opts.max_tries) +
                       " tries; use a smaller depth or sigma_w");
}

double linear_residual_fraction(const Series& sources, const Series& observed) {
  if (sources.rows() != observed.rows())
    throw DimensionError("linear_residual_fraction: row mismatch");
  const std::size_t n = sources.rows();
  const std::size_t ds = sources.cols();
  const std::size_t dx = observed.cols();
  if (n < ds + 2) throw ContractViolation("linear_residual_fraction: too few rows");

  Eigen::MatrixXd design(n, ds + 1);
  for (std::size_t r = 0; r < n; ++r) {
    design(r, 0) = 1.0;
    for (std::size_t j = 0; j < ds; ++j) design(r, j + 1) = sources(r, j);
  }
  Eigen::MatrixXd y(n, dx);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < dx; ++j) y(r, j) = observed(r, j);

  const Eigen::MatrixXd beta = design.colPivHouseholderQr().solve(y);
  const Eigen::MatrixXd resid = y - design * beta;

  const Eigen::RowVectorXd mean = y.colwise().mean();
  const Eigen::MatrixXd centered = y.rowwise() - mean;
  const double ss_tot = centered.squaredNorm();
  if (ss_tot <= 0.0) throw DegenerateInput("linear_residual_fraction: constant observations");
  return resid.squaredNorm() / ss_tot;
}

}  // namespace slowflow::datagen
