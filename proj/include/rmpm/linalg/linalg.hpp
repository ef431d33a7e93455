#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rmpm/linalg/matrix.hpp"

namespace rmpm::linalg {

// Thin singular value decomposition a = u * diag(s) * vt with r = min(rows, cols):
// u is rows x r with orthonormal columns, vt is r x cols with orthonormal rows,
// s is non-increasing and non-negative.
//
// Sign convention: the largest-magnitude entry of each column of u (first one
// on ties) is non-negative, so repeated runs produce identical bits.
struct SvdResult {
  Matrix u;
  std::vector<double> s;
  Matrix vt;
};

// One-sided Jacobi SVD. Throws Errc::non_finite on NaN/Inf input.
SvdResult svd(const Matrix& a);

// Eigendecomposition of a symmetric matrix: c = vectors * diag(values) * vectors^T,
// eigenvalues in non-increasing order, eigenvectors as columns.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};

SymmetricEigen symmetric_eigen(const Matrix& c);

// Smallest k with sum_{i<k} s_i^2 / sum_i s_i^2 >= fraction (energy convention).
std::size_t truncate_by_variance(std::span<const double> s, double fraction);

// Pseudo-inverse square root of a symmetric PSD matrix. Eigenvalues below
// `eps` map to zero, so r * c * r is the projector onto the retained eigenspace.
Matrix inv_sqrt_psd(const Matrix& c, double eps);

// Product-moment correlation, clamped to [-1, 1].
// Errc::length_mismatch for unequal or too-short inputs,
// Errc::constant_series when either input has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace rmpm::linalg
