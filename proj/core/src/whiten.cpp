#include "slowflow/whiten.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "slowflow/errors.hpp"

namespace slowflow::ica {

namespace {
using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

Whitener whiten_fit(const Series& x) {
  const std::size_t t = x.rows();
  const std::size_t d = x.cols();
  if (t <= d) throw ContractViolation("whiten_fit: need more rows than channels");

  Whitener w;
  w.mean = column_mean(x);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t r = 0; r < t; ++r) {
    Eigen::VectorXd row(d);
    for (std::size_t j = 0; j < d; ++j) row(j) = x(r, j) - w.mean(0, j);
    cov.noalias() += row * row.transpose();
  }
  cov /= static_cast<double>(t);
  const double jitter = 1e-9 * cov.trace() / static_cast<double>(d);
  cov.diagonal().array() += jitter;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& evals = eig.eigenvalues();  // ascending
  if (evals(0) <= 1e-10) {
    const Eigen::VectorXd null_dir = eig.eigenvectors().col(0);
    std::string dir = "[";
    for (std::size_t j = 0; j < d; ++j) dir += (j ? ", " : "") + std::to_string(null_dir(j));
    dir += "]";
    throw DegenerateInput("whiten_fit: covariance is rank deficient along " + dir);
  }

  // ZCA: V diag(1/sqrt(lambda)) V^T
  Eigen::MatrixXd zca = eig.eigenvectors() * evals.cwiseSqrt().cwiseInverse().asDiagonal() *
                        eig.eigenvectors().transpose();
  w.transform = Matrix(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) w.transform(i, j) = zca(i, j);
  return w;
}

Series whiten_apply(const Whitener& w, const Series& x) {
  if (x.cols() != w.mean.cols()) throw DimensionError("whiten_apply: width mismatch");
  Series centered(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) centered(r, j) = x(r, j) - w.mean(0, j);
  return matmul(centered, transpose(w.transform));
}

}  // namespace slowflow::ica
