#pragma once

#include <cstdint>

#include "slowflow/matrix.hpp"
#include "slowflow/whiten.hpp"

namespace slowflow::ica {

/// E[log cosh X] for X ~ N(0,1); reference point of the log-cosh
/// non-Gaussianity measure.
inline constexpr double kGaussLogCosh = 0.374567207491438;

struct FastIcaOptions {
  std::size_t max_iter = 500;
  double tol = 1e-6;
  std::uint64_t seed = 1;
  /// Components whose log-cosh moment sits within this band around the
  /// Gaussian value count as Gaussian (unidentifiable).
  double gaussian_band = 0.015;
};

struct FastIcaResult {
  /// Orthogonal demixing in whitened coordinates (d x d); estimated sources
  /// in whitened space are z_w * rotation^T.
  Matrix rotation;
  /// Set when the fixed point did not settle within max_iter, or when every
  /// component looks Gaussian and the rotation is therefore arbitrary.
  bool warning = false;
  std::size_t iterations = 0;
};

/// Symmetric (parallel) FastICA with the log-cosh contrast on pre-whitened
/// data. Deterministic for a fixed options seed.
FastIcaResult fastica(const Series& z_whitened, const FastIcaOptions& opts = {});

/// Linear demixing matrix: rows map observations to source estimates.
struct DemixingMatrix {
  Matrix a;  // d x d, rows unit norm
};

struct IcaSeparation {
  Series sources;      // estimates over the apply range
  DemixingMatrix demix;  // composed with the whitener, rows unit norm
  Matrix offset;       // 1 x d mean removed before demixing
  bool warning = false;
};

/// Whitens x_fit, runs FastICA, composes rotation with the whitening matrix,
/// fixes the component signs (largest-magnitude correlation with the data
/// made positive) and applies the result to x_apply.
IcaSeparation ica_separate(const Series& x_fit, const Series& x_apply,
                           const FastIcaOptions& opts = {});

}  // namespace slowflow::ica
