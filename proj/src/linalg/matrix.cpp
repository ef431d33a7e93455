#include "rmpm/linalg/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rmpm/error.hpp"

namespace rmpm::linalg {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(Errc::shape_mismatch, "matrix data holds " + std::to_string(data_.size()) +
                                   " values, expected " + std::to_string(rows_ * cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, Errc::shape_mismatch, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
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

Matrix Matrix::top_rows(std::size_t count) const {
  require(count <= rows_, Errc::shape_mismatch, "top_rows beyond matrix height");
  return Matrix(count, cols_,
                std::vector<double>(data_.begin(), data_.begin() + count * cols_));
}

Matrix Matrix::select_cols(std::span<const std::size_t> indices) const {
  Matrix out(rows_, indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    require(indices[j] < cols_, Errc::invalid_argument, "column index out of range");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    const auto src = row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < indices.size(); ++j) dst[j] = src[indices[j]];
  }
  return out;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), Errc::shape_mismatch, "matrix product dimensions");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), Errc::shape_mismatch, "a*b^T dimensions");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto bj = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < ai.size(); ++k) acc += ai[k] * bj[k];
      out(i, j) = acc;
    }
  }
  return out;
}

namespace {
template <typename Op>
Matrix elementwise(const Matrix& a, const Matrix& b, Op op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), Errc::shape_mismatch,
          "elementwise operand shapes differ");
  Matrix out(a.rows(), a.cols());
  auto o = out.values();
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = op(x[i], y[i]);
  return out;
}
}  // namespace

Matrix operator-(const Matrix& a, const Matrix& b) {
  return elementwise(a, b, [](double x, double y) { return x - y; });
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  return elementwise(a, b, [](double x, double y) { return x + y; });
}

double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return std::sqrt(acc);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace rmpm::linalg
