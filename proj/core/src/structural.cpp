#include "slowflow/structural.hpp"

#include <cmath>
#include <numbers>

#include "slowflow/errors.hpp"
#include "slowflow/rng.hpp"

namespace slowflow::datagen {

namespace {

void validate(const StructuralSpec& spec) {
  if (spec.length < 64) throw ContractViolation("gen_structural: length must be >= 64");
  if (spec.season_period < 2.0)
    throw ContractViolation("gen_structural: season period degenerate");
  if (spec.cycle_mean_segment < 2.0)
    throw ContractViolation("gen_structural: zero-length cycle segments");
  if (spec.cycle_freq_lo <= 0.0 || spec.cycle_freq_hi > 0.5 ||
      spec.cycle_freq_lo > spec.cycle_freq_hi)
    throw ContractViolation("gen_structural: cycle frequency range invalid");
  if (spec.noise_std < 0.0) throw ContractViolation("gen_structural: negative noise std");
  if (spec.trend_curvature_max < 0.0)
    throw ContractViolation("gen_structural: negative curvature bound");
}

std::vector<double> make_trend(std::size_t t, Rng& rng, double curvature_max) {
  const double gamma = curvature_max <= 0.1 ? curvature_max : rng.uniform(0.1, curvature_max);
  std::vector<double> v(t);
  for (std::size_t i = 0; i < t; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(t - 1);
    v[i] = u + gamma * u * u;
  }
  return v;
}

std::vector<double> make_season(std::size_t t, Rng& rng, double period) {
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> v(t);
  for (std::size_t i = 0; i < t; ++i)
    v[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period + phase);
  return v;
}

std::vector<double> make_cycle(std::size_t t, Rng& rng, const StructuralSpec& spec) {
  std::vector<double> v(t);
  double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double freq = rng.uniform(spec.cycle_freq_lo, spec.cycle_freq_hi);
  std::size_t next_change = 1 + static_cast<std::size_t>(rng.exponential(spec.cycle_mean_segment));
  for (std::size_t i = 0; i < t; ++i) {
    v[i] = std::sin(theta);
    theta += 2.0 * std::numbers::pi * freq;  // continuous phase across segments
    if (i + 1 >= next_change) {
      freq = rng.uniform(spec.cycle_freq_lo, spec.cycle_freq_hi);
      next_change = i + 2 + static_cast<std::size_t>(rng.exponential(spec.cycle_mean_segment));
    }
  }
  return v;
}

void standardize_inplace(std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  const double sd = std::sqrt(s2 / static_cast<double>(v.size()));
  if (sd < 1e-12) throw DegenerateInput("gen_structural: constant component");
  for (double& x : v) x = (x - m) / sd;
}

}  // namespace

StructuralSpec default_structural_spec(std::size_t length, std::uint64_t seed) {
  StructuralSpec spec;
  spec.length = length;
  spec.season_period = static_cast<double>(length) / 16.0;
  spec.seed = seed;
  return spec;
}

Series gen_structural(const StructuralSpec& spec) {
  validate(spec);
  const std::size_t t = spec.length;

  // Independent substreams keep the components asynchronous by construction.
  Rng trend_rng(derive_seed(spec.seed, 1));
  Rng season_rng(derive_seed(spec.seed, 2));
  Rng cycle1_rng(derive_seed(spec.seed, 3));
  Rng cycle2_rng(derive_seed(spec.seed, 4));
  Rng noise_rng(derive_seed(spec.seed, 5));

  std::vector<std::vector<double>> comps;
  comps.push_back(make_trend(t, trend_rng, spec.trend_curvature_max));
  comps.push_back(make_season(t, season_rng, spec.season_period));
  comps.push_back(make_cycle(t, cycle1_rng, spec));
  comps.push_back(make_cycle(t, cycle2_rng, spec));

  Series out(t, comps.size());
  for (std::size_t j = 0; j < comps.size(); ++j) {
    standardize_inplace(comps[j]);
    for (std::size_t i = 0; i < t; ++i) {
      const double noise = spec.noise_std > 0.0 ? noise_rng.normal(0.0, spec.noise_std) : 0.0;
      out(i, j) = comps[j][i] + noise;
    }
  }
  return out;
}

}  // namespace slowflow::datagen
