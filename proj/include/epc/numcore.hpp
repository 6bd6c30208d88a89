#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace epc {

/// Dense row-major matrix of doubles. Entries are checked finite when the
/// matrix is built from caller data.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  std::string shape_string() const;
  bool all_finite() const noexcept;

  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a * b^T; throws a shape error when the column counts differ.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// a * b (plain product); a.cols must equal b.rows.
Matrix matmul_nn(const Matrix& a, const Matrix& b);

/// a^T * b; a.rows must equal b.rows.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

inline constexpr double kNormEps = 1e-12;

/// Each row divided by max(||row||, eps).
Matrix row_l2_normalize(const Matrix& m, double eps = kNormEps);

/// Backward of row_l2_normalize: given the input and the upstream gradient
/// with respect to the normalized output, returns the gradient on the input.
Matrix row_l2_normalize_backward(const Matrix& input, const Matrix& grad_out,
                                 double eps = kNormEps);

/// Column-wise variants (normalize each column, i.e. channel map).
Matrix col_l2_normalize(const Matrix& m, double eps = kNormEps);
Matrix col_l2_normalize_backward(const Matrix& input, const Matrix& grad_out,
                                 double eps = kNormEps);

/// Max-shifted log(sum(exp(v))). Throws kEmptyReduction on empty input.
double logsumexp(std::span<const double> values);

/// Fixed-order pairwise summation; result depends only on the input order.
double pairwise_sum(std::span<const double> values);

void axpy(double alpha, const Matrix& x, Matrix& y);
Matrix scaled(const Matrix& m, double alpha);

}  // namespace epc
