#include "epc/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "epc/error.hpp"

namespace epc {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) fail(ErrorKind::kDomain, "matrix fill value is not finite");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    std::ostringstream os;
    os << "matrix data length " << data_.size() << " does not match shape " << rows_ << "x"
       << cols_;
    fail(ErrorKind::kShape, os.str());
  }
  if (!all_finite()) fail(ErrorKind::kDomain, "matrix contains non-finite entries");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) fail(ErrorKind::kShape, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  if (!all_finite()) fail(ErrorKind::kDomain, "matrix contains non-finite entries");
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorKind::kShape, "matmul_nt: shape mismatch " + a.shape_string() + " vs " +
                                b.shape_string() + " (column counts differ)");
  }
  Matrix out(a.rows(), b.rows());
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i).data();
    double* orow = out.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.row(j).data();
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += ar[t] * br[t];
      orow[j] = acc;
    }
  }
  return out;
}

Matrix matmul_nn(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::kShape,
         "matmul_nn: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* orow = out.row(i).data();
    for (std::size_t t = 0; t < a.cols(); ++t) {
      const double av = a(i, t);
      if (av == 0.0) continue;
      const double* br = b.row(t).data();
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += av * br[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    fail(ErrorKind::kShape,
         "matmul_tn: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double av = a(r, i);
      if (av == 0.0) continue;
      double* orow = out.row(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += av * br[j];
    }
  }
  return out;
}

namespace {

double norm_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Matrix row_l2_normalize(const Matrix& m, double eps) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double denom = std::max(norm_of(m.row(r)), eps);
    for (double& x : out.row(r)) x /= denom;
  }
  return out;
}

Matrix row_l2_normalize_backward(const Matrix& input, const Matrix& grad_out, double eps) {
  if (input.rows() != grad_out.rows() || input.cols() != grad_out.cols()) {
    fail(ErrorKind::kShape, "row_l2_normalize_backward: shape mismatch " +
                                input.shape_string() + " vs " + grad_out.shape_string());
  }
  Matrix grad(input.rows(), input.cols());
  for (std::size_t r = 0; r < input.rows(); ++r) {
    auto x = input.row(r);
    auto g = grad_out.row(r);
    auto dx = grad.row(r);
    const double n = norm_of(x);
    if (n <= eps) {
      for (std::size_t c = 0; c < x.size(); ++c) dx[c] = g[c] / eps;
      continue;
    }
    double yg = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) yg += (x[c] / n) * g[c];
    for (std::size_t c = 0; c < x.size(); ++c) dx[c] = (g[c] - (x[c] / n) * yg) / n;
  }
  return grad;
}

Matrix col_l2_normalize(const Matrix& m, double eps) {
  return row_l2_normalize(m.transposed(), eps).transposed();
}

Matrix col_l2_normalize_backward(const Matrix& input, const Matrix& grad_out, double eps) {
  return row_l2_normalize_backward(input.transposed(), grad_out.transposed(), eps).transposed();
}

double logsumexp(std::span<const double> values) {
  if (values.empty()) {
    fail(ErrorKind::kEmptyReduction, "logsumexp over an empty set (empty negative set)");
  }
  if (values.size() == 1) return values[0];
  const double mx = *std::max_element(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 8;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    fail(ErrorKind::kShape, "axpy: shape mismatch " + x.shape_string() + " vs " +
                                y.shape_string());
  }
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] += alpha * xs[i];
}

Matrix scaled(const Matrix& m, double alpha) {
  Matrix out = m;
  for (double& v : out.data()) v *= alpha;
  return out;
}

}  // namespace epc
