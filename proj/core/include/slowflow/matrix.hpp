#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace slowflow {

/// Dense 2-D array of doubles, row-major. The single numeric carrier of the
/// library: time series (rows = time steps, cols = channels), network weights
/// and gradients are all Matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, double fill)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;

  void fill(double v) { data_.assign(data_.size(), v); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A multivariate time series: rows are time steps, columns are channels.
using Series = Matrix;

// ---- shape helpers ----------------------------------------------------------

/// "RxC" string for error messages.
std::string shape_str(const Matrix& m);

/// Throws DimensionError("<primitive>: ...") unless shapes satisfy the named op.
void require_same_shape(const char* primitive, const Matrix& a, const Matrix& b);

// ---- dense linear algebra (Eigen-backed matmul, plain loops elsewhere) ------

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);

/// Adds a 1 x cols row vector to every row of a.
Matrix add_row(const Matrix& a, const Matrix& row);

Matrix map_tanh(const Matrix& a);
Matrix map_exp(const Matrix& a);
Matrix map_log(const Matrix& a);
Matrix map_square(const Matrix& a);

double sum(const Matrix& a);
double mean(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

// ---- series / column utilities ----------------------------------------------

std::vector<double> column(const Series& s, std::size_t j);
void set_column(Series& s, std::size_t j, const std::vector<double>& v);

/// Per-column sample mean (1 x d).
Matrix column_mean(const Series& s);
/// Per-column sample standard deviation, denominator n (1 x d).
Matrix column_std(const Series& s);

struct ColumnStats {
  Matrix mean;  // 1 x d
  Matrix std;   // 1 x d
};

/// Returns a copy with every column shifted/scaled to zero mean, unit variance.
/// Throws DegenerateInput naming the column if one has (near) zero variance.
Series standardize_columns(const Series& s, ColumnStats* stats = nullptr);

/// Rows [begin, end) as a new Series.
Series slice_rows(const Series& s, std::size_t begin, std::size_t end);

/// Stacks blocks on top of each other; all must share the column count.
Series vstack(const std::vector<Series>& blocks);

/// Pearson correlation of two equally sized vectors.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Mean squared temporal increment of one column, using the T-1 true increments.
double mean_squared_increment(const Series& s, std::size_t j);

}  // namespace slowflow
