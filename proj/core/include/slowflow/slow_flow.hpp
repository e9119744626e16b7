#pragma once

#include "slowflow/matrix.hpp"

namespace slowflow::flows {

/// Parameter-free invertible layer pairing temporal differencing with
/// cumulative summation. Volume preserving: log|det J| = 0 in both directions.
/// Convention: the inverse (encoding) map differences, the generative map
/// accumulates; the row before the first one is treated as zero, so the first
/// output row of the difference is the first input row unchanged.
struct SlowFlow {};

/// out_1 = z_1, out_t = z_t - z_{t-1}.
Series slow_diff(const Series& z);

/// Running prefix sum along time; exact inverse of slow_diff.
Series slow_cumsum(const Series& z_tilde);

}  // namespace slowflow::flows
