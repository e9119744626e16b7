#pragma once

#include "slowflow/matrix.hpp"

namespace slowflow::ica {

/// Classical linear SFA on pre-whitened input: PCA on the increment signal,
/// keeping the k smallest-eigenvalue directions. Components come back ordered
/// by slowness (mean squared increment non-decreasing), zero mean and unit
/// variance up to sampling error, signs fixed by the positive-correlation
/// convention.
Series linear_sfa(const Series& x_whitened, std::size_t k);

}  // namespace slowflow::ica
