#include "rmpm/svcca/svcca.hpp"

#include <algorithm>
#include <cmath>

#include "rmpm/error.hpp"
#include "rmpm/linalg/linalg.hpp"
#include "rmpm/rng.hpp"

namespace rmpm::svcca {
namespace {

constexpr double kWhitenRelEps = 1e-12;

void check_activation(const ActivationMatrix& z) {
  require(z.neurons() >= 1, Errc::empty_input, "activation matrix has no neurons");
  require(z.samples() >= 2, Errc::invalid_argument, "activation matrix needs at least 2 samples");
  require(z.values.all_finite(), Errc::non_finite, "activation matrix contains NaN or Inf");
}

void check_aligned(std::uint64_t fa, std::size_t na, std::uint64_t fb, std::size_t nb) {
  if (fa != fb || na != nb) {
    fail(Errc::alignment, "activation matrices were computed on different samples (" +
                              std::to_string(na) + " vs " + std::to_string(nb) + " samples)");
  }
}

Matrix covariance(const Matrix& x, const Matrix& y, double denom) {
  Matrix c = linalg::multiply_transposed(x, y);
  for (double& v : c.values()) v /= denom;
  return c;
}

Matrix whitener(const Matrix& cov) {
  const double top = linalg::symmetric_eigen(cov).values.front();
  return linalg::inv_sqrt_psd(cov, kWhitenRelEps * std::max(top, 0.0));
}

}  // namespace

ActivationMatrix center_rows(const ActivationMatrix& z) {
  check_activation(z);
  ActivationMatrix out = z;
  const double n = static_cast<double>(z.samples());
  for (std::size_t r = 0; r < z.neurons(); ++r) {
    auto row = out.values.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= n;
    for (double& v : row) v -= mean;
  }
  return out;
}

ActivationMatrix select_samples(const ActivationMatrix& z, std::span<const std::size_t> indices) {
  require(!indices.empty(), Errc::empty_input, "empty sample subset");
  ActivationMatrix out;
  out.layer_name = z.layer_name;
  out.values = z.values.select_cols(indices);
  std::uint64_t h = mix64(z.fingerprint ^ 0x5b5e7ULL);
  for (std::size_t i : indices) h = mix64(h ^ static_cast<std::uint64_t>(i));
  out.fingerprint = h;
  return out;
}

Subspace reduce(const ActivationMatrix& z, double variance_fraction) {
  const ActivationMatrix centered = center_rows(z);
  const linalg::SvdResult dec = linalg::svd(centered.values);
  const std::size_t k = linalg::truncate_by_variance(dec.s, variance_fraction);

  Subspace out;
  out.layer_name = z.layer_name;
  out.fingerprint = z.fingerprint;
  out.projected = Matrix(k, z.samples());
  for (std::size_t i = 0; i < k; ++i) {
    const auto src = dec.vt.row(i);
    auto dst = out.projected.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = dec.s[i] * src[j];
  }
  return out;
}

CcaSpectrum cca(const Matrix& x, const Matrix& y) {
  require(x.cols() == y.cols(), Errc::alignment, "cca inputs differ in sample count");
  require(x.rows() >= 1 && y.rows() >= 1, Errc::empty_input, "cca of an empty matrix");
  require(x.cols() >= 2, Errc::invalid_argument, "cca needs at least 2 samples");

  const double denom = static_cast<double>(x.cols() - 1);
  const Matrix wx = whitener(covariance(x, x, denom));
  const Matrix wy = whitener(covariance(y, y, denom));
  const Matrix t = wx * covariance(x, y, denom) * wy;

  CcaSpectrum out;
  out.k1 = x.rows();
  out.k2 = y.rows();
  out.correlations = linalg::svd(t).s;
  for (double& r : out.correlations) r = std::clamp(r, 0.0, 1.0);
  // Centering spends one degree of freedom, so N - 1 samples span at most
  // N - 1 directions.
  if (x.cols() - 1 <= std::max(out.k1, out.k2)) {
    out.rank_deficient = true;
    out.warning = "rank-deficient regime: " + std::to_string(x.cols()) +
                  " samples for retained ranks " + std::to_string(out.k1) + "/" +
                  std::to_string(out.k2);
  }
  return out;
}

CcaSpectrum svcca_correlations(const Subspace& a, const Subspace& b) {
  check_aligned(a.fingerprint, a.samples(), b.fingerprint, b.samples());
  return cca(a.projected, b.projected);
}

CcaSpectrum svcca_correlations(const ActivationMatrix& z1, const ActivationMatrix& z2,
                               double variance_fraction) {
  check_aligned(z1.fingerprint, z1.samples(), z2.fingerprint, z2.samples());
  return svcca_correlations(reduce(z1, variance_fraction), reduce(z2, variance_fraction));
}

double svcca_similarity(const CcaSpectrum& spectrum, std::size_t top_t) {
  require(top_t >= 1, Errc::invalid_argument, "top_t must be at least 1");
  require(!spectrum.correlations.empty(), Errc::empty_input, "empty correlation spectrum");
  std::vector<double> sorted = spectrum.correlations;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t count = std::min(top_t, sorted.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) acc += sorted[i];
  return acc / static_cast<double>(count);
}

}  // namespace rmpm::svcca
