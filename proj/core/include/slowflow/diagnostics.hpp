#pragma once

#include "slowflow/matrix.hpp"

namespace slowflow::ica {

/// Instantaneous and lag-1 covariance of the standardized channels (so a
/// duplicated channel shows exactly 1). Diagonal both ways is the
/// independence condition the demixed sources should satisfy.
struct LaggedCovReport {
  Matrix instantaneous;  // d x d
  Matrix lag1;           // d x d
  double max_offdiag = 0.0;
};

LaggedCovReport lagged_cov_diagnostic(const Series& z);

}  // namespace slowflow::ica
