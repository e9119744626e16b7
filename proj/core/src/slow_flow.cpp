#include "slowflow/slow_flow.hpp"

#include "slowflow/errors.hpp"

namespace slowflow::flows {

Series slow_diff(const Series& z) {
  if (z.rows() == 0) throw ContractViolation("slow_diff: empty series");
  Series out(z.rows(), z.cols());
  for (std::size_t j = 0; j < z.cols(); ++j) out(0, j) = z(0, j);
  for (std::size_t t = 1; t < z.rows(); ++t)
    for (std::size_t j = 0; j < z.cols(); ++j) out(t, j) = z(t, j) - z(t - 1, j);
  return out;
}

Series slow_cumsum(const Series& z_tilde) {
  if (z_tilde.rows() == 0) throw ContractViolation("slow_cumsum: empty series");
  Series out(z_tilde.rows(), z_tilde.cols());
  for (std::size_t j = 0; j < z_tilde.cols(); ++j) out(0, j) = z_tilde(0, j);
  for (std::size_t t = 1; t < z_tilde.rows(); ++t)
    for (std::size_t j = 0; j < z_tilde.cols(); ++j)
      out(t, j) = z_tilde(t, j) + out(t - 1, j);
  return out;
}

}  // namespace slowflow::flows
