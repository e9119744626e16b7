#pragma once

#include <string>
#include <vector>

#include "slowflow/matrix.hpp"

namespace slowflow::eval {

/// Entry (i, j) = |Pearson corr(truth column i, estimate column j)|.
/// Throws DegenerateInput naming the first constant column.
Matrix correlation_matrix(const Series& truth, const Series& est);

struct MatchResult {
  std::vector<std::size_t> assignment;  // truth row i -> estimate column
  std::vector<double> per_pair;         // selected correlations, truth order
  double matched_mean = 0.0;            // 100 * mean(per_pair)
};

/// Optimal one-to-one assignment maximizing the summed correlation,
/// exhaustive over the d! permutations (experiments have d <= 6).
MatchResult match_and_score(const Matrix& corr);

struct CorrelationReport {
  Matrix corr;
  MatchResult match;
};

CorrelationReport score_sources(const Series& truth, const Series& est);

struct AggregateScore {
  std::string label;
  double mean = 0.0;
  double stddev = 0.0;  // (n-1)-denominator; undefined (0) when n < 2
  std::size_t n = 0;
  bool stddev_defined = false;
};

AggregateScore aggregate(const std::vector<double>& matched_means, const std::string& label);

}  // namespace slowflow::eval
