#include "slowflow/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slowflow/errors.hpp"

namespace slowflow::eval {

Matrix correlation_matrix(const Series& truth, const Series& est) {
  if (truth.rows() != est.rows() || truth.cols() != est.cols()) {
    throw DimensionError("correlation_matrix: " + shape_str(truth) + " vs " + shape_str(est));
  }
  const std::size_t d = truth.cols();

  auto check_columns = [](const Series& s, const char* which) {
    const Matrix sd = column_std(s);
    for (std::size_t j = 0; j < s.cols(); ++j) {
      if (sd(0, j) < 1e-12) {
        throw DegenerateInput("correlation_matrix: constant " + std::string(which) + " column " +
                              std::to_string(j));
      }
    }
  };
  check_columns(truth, "truth");
  check_columns(est, "estimate");

  Matrix corr(d, d);
  std::vector<std::vector<double>> tcols(d), ecols(d);
  for (std::size_t j = 0; j < d; ++j) {
    tcols[j] = column(truth, j);
    ecols[j] = column(est, j);
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) corr(i, j) = std::abs(pearson(tcols[i], ecols[j]));
  return corr;
}

MatchResult match_and_score(const Matrix& corr) {
  if (corr.rows() != corr.cols() || corr.rows() == 0)
    throw ContractViolation("match_and_score: matrix must be square and non-empty");
  const std::size_t d = corr.rows();

  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_sum = -1.0;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += corr(i, perm[i]);
    if (s > best_sum) {
      best_sum = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  MatchResult res;
  res.assignment = best;
  for (std::size_t i = 0; i < d; ++i) res.per_pair.push_back(corr(i, best[i]));
  res.matched_mean = 100.0 * best_sum / static_cast<double>(d);
  return res;
}

CorrelationReport score_sources(const Series& truth, const Series& est) {
  CorrelationReport rep;
  rep.corr = correlation_matrix(truth, est);
  rep.match = match_and_score(rep.corr);
  return rep;
}

AggregateScore aggregate(const std::vector<double>& matched_means, const std::string& label) {
  if (matched_means.empty()) throw ContractViolation("aggregate: no runs");
  AggregateScore agg;
  agg.label = label;
  agg.n = matched_means.size();
  agg.mean = std::accumulate(matched_means.begin(), matched_means.end(), 0.0) /
             static_cast<double>(agg.n);
  if (agg.n >= 2) {
    double s2 = 0.0;
    for (double v : matched_means) s2 += (v - agg.mean) * (v - agg.mean);
    agg.stddev = std::sqrt(s2 / static_cast<double>(agg.n - 1));
    agg.stddev_defined = true;
  }
  return agg;
}

}  // namespace slowflow::eval
