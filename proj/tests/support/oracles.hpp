#pragma once

// Test-only reference computations. None of these share code with the
// library paths they are used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <vector>

#include "rmpm/linalg/matrix.hpp"

namespace rmpm::testing {

using linalg::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen,
                            double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(gen);
  return m;
}

// Classical Jacobi eigenvalue algorithm with largest-off-diagonal pivoting,
// in long double. Returns eigenvalues sorted descending.
inline std::vector<double> jacobi_eigenvalues(const Matrix& sym) {
  const std::size_t n = sym.rows();
  std::vector<std::vector<long double>> a(n, std::vector<long double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = sym(i, j);
  for (int iter = 0; iter < 100000; ++iter) {
    std::size_t p = 0, q = 1;
    long double best = 0.0L;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (std::fabs(a[i][j]) > best) {
          best = std::fabs(a[i][j]);
          p = i;
          q = j;
        }
    if (n < 2 || best < 1e-30L) break;
    const long double phi = 0.5L * std::atan2(2.0L * a[p][q], a[q][q] - a[p][p]);
    const long double c = std::cos(phi), s = std::sin(phi);
    for (std::size_t k = 0; k < n; ++k) {
      const long double akp = a[k][p], akq = a[k][q];
      a[k][p] = c * akp - s * akq;
      a[k][q] = s * akp + c * akq;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const long double apk = a[p][k], aqk = a[q][k];
      a[p][k] = c * apk - s * aqk;
      a[q][k] = s * apk + c * aqk;
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(a[i][i]);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

inline Matrix gram(const Matrix& a) {
  Matrix g(a.rows(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.rows(); ++j) {
      long double acc = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += (long double)a(i, k) * a(j, k);
      g(i, j) = static_cast<double>(acc);
    }
  return g;
}

// Pearson via explicit sample covariance and standard deviations (n-1
// normalization), accumulated in long double.
inline double pearson_two_pass(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  cov /= (n - 1);
  const long double sx = std::sqrt(vx / (n - 1));
  const long double sy = std::sqrt(vy / (n - 1));
  return static_cast<double>(cov / (sx * sy));
}

// Top canonical correlation by direct numerical maximization of
// corr(u^T x, v^T y) over projection vectors (x: p x N, y: q x N, p, q small).
// Random multi-start followed by a shrinking coordinate pattern search.
inline double max_projection_correlation(const Matrix& x, const Matrix& y, std::uint64_t seed) {
  const std::size_t p = x.rows(), q = y.rows(), n = x.cols();
  auto center = [n](const Matrix& m) {
    std::vector<std::vector<long double>> out(m.rows(), std::vector<long double>(n));
    for (std::size_t r = 0; r < m.rows(); ++r) {
      long double mean = 0;
      for (std::size_t c = 0; c < n; ++c) mean += m(r, c);
      mean /= n;
      for (std::size_t c = 0; c < n; ++c) out[r][c] = m(r, c) - mean;
    }
    return out;
  };
  const auto xc = center(x);
  const auto yc = center(y);
  auto block = [n](const auto& a, const auto& b) {
    std::vector<std::vector<long double>> s(a.size(), std::vector<long double>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) {
        long double acc = 0;
        for (std::size_t k = 0; k < n; ++k) acc += a[i][k] * b[j][k];
        s[i][j] = acc;
      }
    return s;
  };
  const auto sxx = block(xc, xc), syy = block(yc, yc), sxy = block(xc, yc);

  auto objective = [&](const std::vector<double>& w) {
    long double num = 0, du = 0, dv = 0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < q; ++j) num += w[i] * sxy[i][j] * w[p + j];
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) du += w[i] * sxx[i][j] * w[j];
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = 0; j < q; ++j) dv += w[p + i] * syy[i][j] * w[p + j];
    if (du <= 0 || dv <= 0) return -2.0;
    return static_cast<double>(num / std::sqrt(du * dv));
  };

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  std::vector<double> best(p + q);
  double best_f = -2.0;
  for (int s = 0; s < 4000; ++s) {
    std::vector<double> w(p + q);
    for (double& v : w) v = dist(gen);
    const double f = objective(w);
    if (f > best_f) {
      best_f = f;
      best = w;
    }
  }
  auto normalize = [&](std::vector<double>& w) {
    double nu = 0, nv = 0;
    for (std::size_t i = 0; i < p; ++i) nu += w[i] * w[i];
    for (std::size_t i = 0; i < q; ++i) nv += w[p + i] * w[p + i];
    for (std::size_t i = 0; i < p; ++i) w[i] /= std::sqrt(nu);
    for (std::size_t i = 0; i < q; ++i) w[p + i] /= std::sqrt(nv);
  };
  normalize(best);
  double step = 0.25;
  while (step > 1e-12) {
    bool improved = false;
    for (std::size_t d = 0; d < p + q; ++d) {
      for (double dir : {1.0, -1.0}) {
        auto trial = best;
        trial[d] += dir * step;
        normalize(trial);
        const double f = objective(trial);
        if (f > best_f) {
          best_f = f;
          best = trial;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return best_f;
}

}  // namespace rmpm::testing
