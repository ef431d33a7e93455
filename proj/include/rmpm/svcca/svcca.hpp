#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rmpm/linalg/matrix.hpp"

namespace rmpm::svcca {

using linalg::Matrix;

// Activations of one layer of one model: row j holds neuron j's outputs over
// the evaluation samples. Matrices are only comparable when their sample
// fingerprints match, i.e. they were produced from the same ordered samples.
struct ActivationMatrix {
  std::string layer_name;
  std::uint64_t fingerprint = 0;
  Matrix values;

  std::size_t neurons() const noexcept { return values.rows(); }
  std::size_t samples() const noexcept { return values.cols(); }
};

struct SvccaConfig {
  double variance_fraction = 0.99;
  std::size_t top_t = 20;
};

// Canonical correlations between two retained subspaces.
struct CcaSpectrum {
  std::vector<double> correlations;  // non-increasing, in [0, 1]
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  // Set when samples - 1 <= max(k1, k2); the spectrum is still computed.
  bool rank_deficient = false;
  std::string warning;
};

// SVD-truncated, centered representation of one activation matrix:
// diag(s[:k]) * vt[:k], a k x N matrix. Computing it once lets an ensemble
// reuse it across all pairs.
struct Subspace {
  std::string layer_name;
  std::uint64_t fingerprint = 0;
  Matrix projected;

  std::size_t rank() const noexcept { return projected.rows(); }
  std::size_t samples() const noexcept { return projected.cols(); }
};

ActivationMatrix center_rows(const ActivationMatrix& z);

// Restricts to the given sample columns; the fingerprint is re-derived from
// the parent fingerprint and the index list so subsets stay comparable.
ActivationMatrix select_samples(const ActivationMatrix& z, std::span<const std::size_t> indices);

Subspace reduce(const ActivationMatrix& z, double variance_fraction);

// Plain CCA between row-centered x (k1 x N) and y (k2 x N): singular values of
// Sxx^{-1/2} Sxy Syy^{-1/2} with (N-1)-normalized covariances. Whitening drops
// eigenvalues below 1e-12 of the largest one.
CcaSpectrum cca(const Matrix& x, const Matrix& y);

CcaSpectrum svcca_correlations(const Subspace& a, const Subspace& b);
CcaSpectrum svcca_correlations(const ActivationMatrix& z1, const ActivationMatrix& z2,
                               double variance_fraction = 0.99);

// Mean of the min(top_t, len) largest correlations.
double svcca_similarity(const CcaSpectrum& spectrum, std::size_t top_t = 20);

}  // namespace rmpm::svcca
