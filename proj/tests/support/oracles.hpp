// Test-only oracles, kept independent of the library paths they check.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "slowflow/matrix.hpp"

namespace oracles {

/// Central finite differences of a scalar function w.r.t. every entry of the
/// given parameter blocks (mutated in place, restored afterwards).
inline std::vector<slowflow::Matrix> finite_diff_grads(
    const std::vector<slowflow::Matrix*>& params, const std::function<double()>& f,
    double step = 1e-6) {
  std::vector<slowflow::Matrix> grads;
  for (slowflow::Matrix* p : params) {
    slowflow::Matrix g(p->rows(), p->cols());
    for (std::size_t k = 0; k < p->size(); ++k) {
      const double saved = p->data()[k];
      p->data()[k] = saved + step;
      const double up = f();
      p->data()[k] = saved - step;
      const double down = f();
      p->data()[k] = saved;
      g.data()[k] = (up - down) / (2.0 * step);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

inline double max_rel_error(const std::vector<slowflow::Matrix>& a,
                            const std::vector<const slowflow::Matrix*>& b,
                            double denom_floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      const double x = a[i].data()[k];
      const double y = b[i]->data()[k];
      const double denom = std::max({std::abs(x), std::abs(y), denom_floor});
      worst = std::max(worst, std::abs(x - y) / denom);
    }
  }
  return worst;
}

/// log|det| of the full (T*d x T*d) Jacobian of a Series -> Series map,
/// assembled entry by entry with central differences.
inline double numerical_logdet(const std::function<slowflow::Series(const slowflow::Series&)>& f,
                               const slowflow::Series& x, double step = 1e-6) {
  const std::size_t n = x.size();
  Eigen::MatrixXd jac(n, n);
  slowflow::Series xp = x;
  for (std::size_t k = 0; k < n; ++k) {
    const double saved = xp.data()[k];
    xp.data()[k] = saved + step;
    const slowflow::Series up = f(xp);
    xp.data()[k] = saved - step;
    const slowflow::Series down = f(xp);
    xp.data()[k] = saved;
    for (std::size_t i = 0; i < n; ++i)
      jac(i, k) = (up.data()[i] - down.data()[i]) / (2.0 * step);
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
  return std::log(std::abs(lu.determinant()));
}

/// Brute-force 2-D ICA: grid over rotation angles, maximizing the summed
/// log-cosh departure from Gaussianity. Returns the best rotation's sources.
inline slowflow::Series rotation_grid_unmix(const slowflow::Series& z_whitened,
                                            double gauss_logcosh, std::size_t grid = 1571) {
  const std::size_t t = z_whitened.rows();
  double best_score = -1.0;
  slowflow::Series best = z_whitened;
  for (std::size_t g = 0; g < grid; ++g) {
    const double theta = (std::numbers::pi / 2.0) * static_cast<double>(g) /
                         static_cast<double>(grid);
    const double c = std::cos(theta), s = std::sin(theta);
    double score = 0.0;
    slowflow::Series y(t, 2);
    for (std::size_t r = 0; r < t; ++r) {
      y(r, 0) = c * z_whitened(r, 0) + s * z_whitened(r, 1);
      y(r, 1) = -s * z_whitened(r, 0) + c * z_whitened(r, 1);
    }
    for (std::size_t j = 0; j < 2; ++j) {
      double m = 0.0;
      for (std::size_t r = 0; r < t; ++r) m += std::log(std::cosh(y(r, j)));
      score += std::abs(m / static_cast<double>(t) - gauss_logcosh);
    }
    if (score > best_score) {
      best_score = score;
      best = y;
    }
  }
  return best;
}

/// Assignment oracle: depth-first search with backtracking, best-sum
/// one-to-one matching. Independent of the next_permutation route.
inline double backtracking_best_sum(const slowflow::Matrix& corr) {
  const std::size_t d = corr.rows();
  std::vector<bool> used(d, false);
  std::function<double(std::size_t)> go = [&](std::size_t row) -> double {
    if (row == d) return 0.0;
    double best = -1e300;
    for (std::size_t j = 0; j < d; ++j) {
      if (used[j]) continue;
      used[j] = true;
      best = std::max(best, corr(row, j) + go(row + 1));
      used[j] = false;
    }
    return best;
  };
  return go(0);
}

}  // namespace oracles
