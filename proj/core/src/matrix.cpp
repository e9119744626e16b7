#include "slowflow/matrix.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "slowflow/errors.hpp"

namespace slowflow {

namespace {
using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;
using MutMap = Eigen::Map<EigenRowMajor>;
}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("from_rows: ragged initializer");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const char* primitive, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(primitive) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  if (out.size() == 0) return out;
  MutMap(out.data(), out.rows(), out.cols()).noalias() =
      ConstMap(a.data(), a.rows(), a.cols()) * ConstMap(b.data(), b.rows(), b.cols());
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape("add", a, b);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape("sub", a, b);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape("mul", a, b);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

Matrix scale(const Matrix& a, double c) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= c;
  return out;
}

Matrix add_row(const Matrix& a, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: bias must be 1x" + std::to_string(a.cols()) + ", got " +
                         shape_str(row));
  }
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += row(0, j);
  return out;
}

Matrix map_tanh(const Matrix& a) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(out.data()[i]);
  return out;
}

Matrix map_exp(const Matrix& a) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::exp(out.data()[i]);
  return out;
}

Matrix map_log(const Matrix& a) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::log(out.data()[i]);
  return out;
}

Matrix map_square(const Matrix& a) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= out.data()[i];
  return out;
}

double sum(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i];
  return s;
}

double mean(const Matrix& a) {
  if (a.size() == 0) throw ContractViolation("mean: empty matrix");
  return sum(a) / static_cast<double>(a.size());
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i]));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

std::vector<double> column(const Series& s, std::size_t j) {
  std::vector<double> v(s.rows());
  for (std::size_t i = 0; i < s.rows(); ++i) v[i] = s(i, j);
  return v;
}

void set_column(Series& s, std::size_t j, const std::vector<double>& v) {
  if (v.size() != s.rows()) throw DimensionError("set_column: length mismatch");
  for (std::size_t i = 0; i < s.rows(); ++i) s(i, j) = v[i];
}

Matrix column_mean(const Series& s) {
  Matrix m(1, s.cols());
  if (s.rows() == 0) return m;
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) m(0, j) += s(i, j);
  for (std::size_t j = 0; j < s.cols(); ++j) m(0, j) /= static_cast<double>(s.rows());
  return m;
}

Matrix column_std(const Series& s) {
  Matrix mu = column_mean(s);
  Matrix sd(1, s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) {
      const double d = s(i, j) - mu(0, j);
      sd(0, j) += d * d;
    }
  for (std::size_t j = 0; j < s.cols(); ++j)
    sd(0, j) = std::sqrt(sd(0, j) / static_cast<double>(s.rows()));
  return sd;
}

Series standardize_columns(const Series& s, ColumnStats* stats) {
  if (s.rows() == 0) throw ContractViolation("standardize_columns: empty series");
  Matrix mu = column_mean(s);
  Matrix sd = column_std(s);
  for (std::size_t j = 0; j < s.cols(); ++j) {
    if (sd(0, j) < 1e-12) {
      throw DegenerateInput("standardize_columns: column " + std::to_string(j) +
                            " has zero variance");
    }
  }
  Series out(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) out(i, j) = (s(i, j) - mu(0, j)) / sd(0, j);
  if (stats) {
    stats->mean = std::move(mu);
    stats->std = std::move(sd);
  }
  return out;
}

Series slice_rows(const Series& s, std::size_t begin, std::size_t end) {
  if (begin > end || end > s.rows()) throw ContractViolation("slice_rows: bad range");
  Series out(end - begin, s.cols());
  for (std::size_t i = begin; i < end; ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) out(i - begin, j) = s(i, j);
  return out;
}

Series vstack(const std::vector<Series>& blocks) {
  if (blocks.empty()) return {};
  const std::size_t d = blocks.front().cols();
  std::size_t rows = 0;
  for (const auto& b : blocks) {
    if (b.cols() != d) throw DimensionError("vstack: column counts differ");
    rows += b.rows();
  }
  Series out(rows, d);
  std::size_t r = 0;
  for (const auto& b : blocks) {
    std::copy(b.data(), b.data() + b.size(), out.data() + r * d);
    r += b.rows();
  }
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw ContractViolation("pearson: length mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw DegenerateInput("pearson: constant input");
  return sab / std::sqrt(saa * sbb);
}

double mean_squared_increment(const Series& s, std::size_t j) {
  if (s.rows() < 2) throw ContractViolation("mean_squared_increment: need at least 2 rows");
  double acc = 0.0;
  for (std::size_t t = 1; t < s.rows(); ++t) {
    const double d = s(t, j) - s(t - 1, j);
    acc += d * d;
  }
  return acc / static_cast<double>(s.rows() - 1);
}

}  // namespace slowflow
