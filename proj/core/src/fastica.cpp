#include "slowflow/fastica.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "slowflow/errors.hpp"
#include "slowflow/rng.hpp"

namespace slowflow::ica {

namespace {

/// (M M^T)^{-1/2} M: nearest orthogonal matrix with the same row space.
Eigen::MatrixXd symmetric_decorrelation(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m * m.transpose());
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose() * m;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

Matrix from_eigen(const Eigen::MatrixXd& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

}  // namespace

FastIcaResult fastica(const Series& z_whitened, const FastIcaOptions& opts) {
  const std::size_t t = z_whitened.rows();
  const std::size_t d = z_whitened.cols();
  if (t <= d) throw ContractViolation("fastica: need more rows than channels");

  const Eigen::MatrixXd z = to_eigen(z_whitened);  // t x d

  Rng rng(opts.seed);
  Eigen::MatrixXd w(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) w(i, j) = rng.normal();
  w = symmetric_decorrelation(w);

  FastIcaResult res;
  double lim = opts.tol + 1.0;
  const double inv_t = 1.0 / static_cast<double>(t);
  while (lim > opts.tol && res.iterations < opts.max_iter) {
    const Eigen::MatrixXd y = z * w.transpose();          // t x d projections
    const Eigen::MatrixXd g = y.array().tanh();           // contrast derivative
    const Eigen::VectorXd g_prime_mean =
        (1.0 - g.array().square()).colwise().mean().transpose();
    Eigen::MatrixXd w_new =
        (g.transpose() * z) * inv_t - g_prime_mean.asDiagonal() * w;
    w_new = symmetric_decorrelation(w_new);
    lim = ((w_new * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = w_new;
    ++res.iterations;
  }
  if (lim > opts.tol) res.warning = true;

  // Gaussian components leave the rotation unidentified regardless of
  // convergence; flag them via the log-cosh moment.
  const Eigen::MatrixXd y = z * w.transpose();
  bool all_gaussian = true;
  for (std::size_t j = 0; j < d; ++j) {
    const double moment = y.col(j).array().cosh().log().mean();
    if (std::abs(moment - kGaussLogCosh) > opts.gaussian_band) {
      all_gaussian = false;
      break;
    }
  }
  if (all_gaussian) res.warning = true;

  res.rotation = from_eigen(w);
  return res;
}

IcaSeparation ica_separate(const Series& x_fit, const Series& x_apply,
                           const FastIcaOptions& opts) {
  if (x_fit.cols() != x_apply.cols()) throw DimensionError("ica_separate: width mismatch");
  const std::size_t d = x_fit.cols();

  const Whitener whitener = whiten_fit(x_fit);
  const Series z_fit = whiten_apply(whitener, x_fit);
  const FastIcaResult ica = fastica(z_fit, opts);

  // Demixing on raw data: rows of (rotation * whitening transform).
  Matrix demix = matmul(ica.rotation, whitener.transform);

  // Sign convention: each component's largest-|correlation| data channel
  // correlates positively.
  const Series s_fit = matmul(whiten_apply(whitener, x_fit), transpose(ica.rotation));
  for (std::size_t i = 0; i < d; ++i) {
    const std::vector<double> comp = column(s_fit, i);
    double best = 0.0;
    double best_sign = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = pearson(comp, column(x_fit, j));
      if (std::abs(r) > best) {
        best = std::abs(r);
        best_sign = r < 0 ? -1.0 : 1.0;
      }
    }
    if (best_sign < 0)
      for (std::size_t j = 0; j < d; ++j) demix(i, j) = -demix(i, j);
  }

  // Unit-norm rows (scale is unidentifiable anyway).
  for (std::size_t i = 0; i < d; ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm += demix(i, j) * demix(i, j);
    norm = std::sqrt(norm);
    if (norm > 0)
      for (std::size_t j = 0; j < d; ++j) demix(i, j) /= norm;
  }

  IcaSeparation sep;
  sep.warning = ica.warning;
  sep.offset = whitener.mean;
  sep.demix.a = std::move(demix);
  Series centered(x_apply.rows(), d);
  for (std::size_t r = 0; r < x_apply.rows(); ++r)
    for (std::size_t j = 0; j < d; ++j) centered(r, j) = x_apply(r, j) - sep.offset(0, j);
  sep.sources = matmul(centered, transpose(sep.demix.a));
  return sep;
}

}  // namespace slowflow::ica
