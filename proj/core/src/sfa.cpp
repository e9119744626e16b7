#include "slowflow/sfa.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "slowflow/errors.hpp"

namespace slowflow::ica {

Series linear_sfa(const Series& x_whitened, std::size_t k) {
  const std::size_t t = x_whitened.rows();
  const std::size_t d = x_whitened.cols();
  if (k > d) throw ContractViolation("linear_sfa: k exceeds channel count");
  if (t <= d) throw ContractViolation("linear_sfa: need more rows than channels");

  // Covariance of the T-1 true increments.
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd delta(d);
  for (std::size_t r = 1; r < t; ++r) {
    for (std::size_t j = 0; j < d; ++j) delta(j) = x_whitened(r, j) - x_whitened(r - 1, j);
    cov.noalias() += delta * delta.transpose();
  }
  cov /= static_cast<double>(t - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);  // ascending eigenvalues

  Series out(t, k);
  for (std::size_t c = 0; c < k; ++c) {
    const Eigen::VectorXd v = eig.eigenvectors().col(c);
    for (std::size_t r = 0; r < t; ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += x_whitened(r, j) * v(j);
      out(r, c) = acc;
    }
  }

  // Positive-correlation sign convention against the input channels.
  for (std::size_t c = 0; c < k; ++c) {
    const std::vector<double> comp = column(out, c);
    double best = 0.0, best_sign = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = pearson(comp, column(x_whitened, j));
      if (std::abs(r) > best) {
        best = std::abs(r);
        best_sign = r < 0 ? -1.0 : 1.0;
      }
    }
    if (best_sign < 0)
      for (std::size_t r = 0; r < t; ++r) out(r, c) = -out(r, c);
  }
  return out;
}

}  // namespace slowflow::ica
