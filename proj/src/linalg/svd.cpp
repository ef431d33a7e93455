#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

#include "rmpm/error.hpp"
#include "rmpm/linalg/linalg.hpp"

namespace rmpm::linalg {
namespace {

constexpr double kOrthoTol = 1e-15;
constexpr int kMaxSweeps = 100;

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void rotate(double* x, double* y, std::size_t n, double c, double s) {
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

// Replaces column `target` of the column-major m x n block with a unit vector
// orthogonal to every column flagged in `accepted`.
void complete_basis(std::vector<double>& cols, std::size_t m, std::size_t target,
                    const std::vector<bool>& accepted) {
  double* out = cols.data() + target * m;
  for (std::size_t e = 0; e < m; ++e) {
    std::fill(out, out + m, 0.0);
    out[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < accepted.size(); ++j) {
        if (!accepted[j] || j == target) continue;
        const double* q = cols.data() + j * m;
        const double proj = dot(q, out, m);
        for (std::size_t i = 0; i < m; ++i) out[i] -= proj * q[i];
      }
    }
    const double norm = std::sqrt(dot(out, out, m));
    if (norm > 0.5) {
      for (std::size_t i = 0; i < m; ++i) out[i] /= norm;
      return;
    }
  }
  fail(Errc::invalid_argument, "unable to complete orthonormal basis");
}

}  // namespace

SvdResult svd(const Matrix& a) {
  require(a.rows() >= 1 && a.cols() >= 1, Errc::empty_input, "svd of an empty matrix");
  require(a.all_finite(), Errc::non_finite, "svd input contains NaN or Inf");

  // Work on the tall orientation t (m x n, m >= n), columns stored contiguously.
  const bool wide = a.rows() < a.cols();
  const std::size_t m = wide ? a.cols() : a.rows();
  const std::size_t n = wide ? a.rows() : a.cols();

  std::vector<double> w(m * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) w[j * m + i] = wide ? a(j, i) : a(i, j);

  std::vector<double> v(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) v[j * n + j] = 1.0;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* wp = w.data() + p * m;
        double* wq = w.data() + q * m;
        const double alpha = dot(wp, wp, m);
        const double beta = dot(wq, wq, m);
        const double gamma = dot(wp, wq, m);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= kOrthoTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(wp, wq, m, c, s);
        rotate(v.data() + p * n, v.data() + q * n, n, c, s);
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(&w[j * m], &w[j * m], m));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  // Left vectors of the tall problem (m x n, column-major) and right vectors
  // (n x n, column-major), both in sorted order.
  std::vector<double> left(m * n);
  std::vector<double> right(n * n);
  std::vector<double> s_sorted(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    s_sorted[k] = sigma[j];
    std::copy_n(&v[j * n], n, &right[k * n]);
    std::copy_n(&w[j * m], m, &left[k * m]);
  }

  const double smax = s_sorted.empty() ? 0.0 : s_sorted.front();
  const double floor = smax * static_cast<double>(m) * DBL_EPSILON;
  std::vector<bool> accepted(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    if (s_sorted[k] > floor && s_sorted[k] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) left[k * m + i] /= s_sorted[k];
      accepted[k] = true;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!accepted[k]) {
      complete_basis(left, m, k, accepted);
      accepted[k] = true;
    }
  }

  // a = t (tall) or t^T (wide); t = left * diag(s) * right^T.
  SvdResult out;
  out.s = s_sorted;
  const std::vector<double>& ucols = wide ? right : left;
  const std::vector<double>& vcols = wide ? left : right;
  const std::size_t urows = a.rows();
  const std::size_t vrows = a.cols();
  out.u = Matrix(urows, n);
  out.vt = Matrix(n, vrows);
  for (std::size_t k = 0; k < n; ++k) {
    const double* uc = &ucols[k * urows];
    const double* vc = &vcols[k * vrows];
    std::size_t arg = 0;
    for (std::size_t i = 1; i < urows; ++i)
      if (std::abs(uc[i]) > std::abs(uc[arg])) arg = i;
    const double sign = uc[arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < urows; ++i) out.u(i, k) = sign * uc[i];
    for (std::size_t i = 0; i < vrows; ++i) out.vt(k, i) = sign * vc[i];
  }
  return out;
}

}  // namespace rmpm::linalg
