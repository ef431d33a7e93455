#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmpm/error.hpp"
#include "rmpm/linalg/linalg.hpp"

namespace rmpm::linalg {
namespace {

constexpr int kMaxSweeps = 100;

double symmetry_tolerance(const Matrix& c) { return 1e-10 * std::max(1.0, max_abs(c)); }

void check_symmetric(const Matrix& c) {
  require(c.rows() == c.cols() && c.rows() >= 1, Errc::shape_mismatch,
          "expected a non-empty square matrix");
  require(c.all_finite(), Errc::non_finite, "matrix contains NaN or Inf");
  const double tol = symmetry_tolerance(c);
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = i + 1; j < c.cols(); ++j)
      if (std::abs(c(i, j) - c(j, i)) > tol) fail(Errc::asymmetric, "matrix is not symmetric");
}

}  // namespace

// Cyclic Jacobi eigenvalue iteration.
SymmetricEigen symmetric_eigen(const Matrix& c) {
  check_symmetric(c);
  const std::size_t n = c.rows();
  Matrix a = c;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (c(i, j) + c(j, i));
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += a(i, i) * a(i, i);
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= 1e-32 * diag || off == 0.0) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(1.0, theta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * cs;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = cs * akp - sn * akq;
          a(k, q) = sn * akp + cs * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = cs * apk - sn * aqk;
          a(q, k) = sn * apk + cs * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = cs * vkp - sn * vkq;
          v(k, q) = sn * vkp + cs * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.values[k] = a(j, j);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(v(i, j)) > std::abs(v(arg, j))) arg = i;
    const double sign = v(arg, j) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = sign * v(i, j);
  }
  return out;
}

Matrix inv_sqrt_psd(const Matrix& c, double eps) {
  require(eps >= 0.0, Errc::invalid_argument, "eps must be non-negative");
  const SymmetricEigen eig = symmetric_eigen(c);
  const std::size_t n = c.rows();
  const double top = std::max(1.0, std::abs(eig.values.front()));
  if (eig.values.back() < -1e-10 * top) {
    fail(Errc::not_psd, "eigenvalue " + std::to_string(eig.values.back()) + " below zero");
  }
  std::vector<double> scale(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    if (eig.values[k] > eps && eig.values[k] > 0.0) scale[k] = 1.0 / std::sqrt(eig.values[k]);

  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        acc += eig.vectors(i, k) * scale[k] * eig.vectors(j, k);
      r(i, j) = r(j, i) = acc;
    }
  }
  return r;
}

}  // namespace rmpm::linalg
