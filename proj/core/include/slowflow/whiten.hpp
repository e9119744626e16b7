#pragma once

#include "slowflow/matrix.hpp"

namespace slowflow::ica {

/// ZCA (symmetric) whitening transform fit on one series: subtract the mean,
/// multiply by the inverse principal square root of the covariance. Symmetric
/// rather than PCA-ordered so no arbitrary axis permutation sneaks in before
/// ICA.
struct Whitener {
  Matrix mean;       // 1 x d
  Matrix transform;  // d x d, symmetric
};

/// Fits on x. Covariance gets a jitter of 1e-9 * trace/d before the
/// eigendecomposition; if the smallest eigenvalue still sits below 1e-10 the
/// input is rank deficient and a DegenerateInput error names the null
/// direction.
Whitener whiten_fit(const Series& x);

Series whiten_apply(const Whitener& w, const Series& x);

}  // namespace slowflow::ica
