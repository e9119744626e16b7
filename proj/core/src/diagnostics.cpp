#include "slowflow/diagnostics.hpp"

#include <cmath>

#include "slowflow/errors.hpp"

namespace slowflow::ica {

LaggedCovReport lagged_cov_diagnostic(const Series& z) {
  const std::size_t t = z.rows();
  const std::size_t d = z.cols();
  if (t < 3) throw ContractViolation("lagged_cov_diagnostic: need at least 3 rows");

  const Series zs = standardize_columns(z);

  LaggedCovReport rep;
  rep.instantaneous = Matrix(d, d);
  rep.lag1 = Matrix(d, d);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) rep.instantaneous(i, j) += zs(r, i) * zs(r, j);
  for (std::size_t r = 0; r + 1 < t; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) rep.lag1(i, j) += zs(r, i) * zs(r + 1, j);

  const double nt = static_cast<double>(t);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      rep.instantaneous(i, j) /= nt;
      rep.lag1(i, j) /= nt - 1.0;
      if (i != j) {
        rep.max_offdiag = std::max(rep.max_offdiag, std::abs(rep.instantaneous(i, j)));
        rep.max_offdiag = std::max(rep.max_offdiag, std::abs(rep.lag1(i, j)));
      }
    }
  return rep;
}

}  // namespace slowflow::ica
