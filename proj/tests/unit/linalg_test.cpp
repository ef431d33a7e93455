#include "rmpm/linalg/linalg.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "rmpm/error.hpp"

namespace rmpm::linalg {
namespace {

using testing::random_matrix;

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an rmpm::Error";
  return Errc::invalid_argument;
}

double orthonormality_error_cols(const Matrix& u) {
  double worst = 0.0;
  for (std::size_t i = 0; i < u.cols(); ++i)
    for (std::size_t j = 0; j < u.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < u.rows(); ++r) acc += u(r, i) * u(r, j);
      worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

Matrix reconstruct(const SvdResult& d) {
  Matrix us = d.u;
  for (std::size_t r = 0; r < us.rows(); ++r)
    for (std::size_t c = 0; c < us.cols(); ++c) us(r, c) *= d.s[c];
  return us * d.vt;
}

TEST(Svd, IdentityHasUnitSingularValues) {
  const auto d = svd(Matrix::identity(3));
  ASSERT_EQ(d.s.size(), 3u);
  for (double s : d.s) EXPECT_DOUBLE_EQ(s, 1.0);
}

TEST(Svd, DiagonalGivesSignedPermutations) {
  const Matrix a{{3.0, 0.0}, {0.0, 1.0}};
  const auto d = svd(a);
  EXPECT_DOUBLE_EQ(d.s[0], 3.0);
  EXPECT_DOUBLE_EQ(d.s[1], 1.0);
  for (const Matrix* m : {&d.u, &d.vt})
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        EXPECT_DOUBLE_EQ(std::abs((*m)(i, j)), i == j ? 1.0 : 0.0);
}

TEST(Svd, MatchesJacobiEigenOracleOnRandomWideMatrix) {
  std::mt19937_64 gen(11);
  const Matrix a = random_matrix(5, 8, gen);
  const auto d = svd(a);
  const auto eig = testing::jacobi_eigenvalues(testing::gram(a));
  ASSERT_EQ(d.s.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(d.s[i], std::sqrt(eig[i]), 1e-9);
}

TEST(Svd, ReconstructionAndOrthonormalityOverShapes) {
  std::mt19937_64 gen(3);
  for (auto [r, c] : {std::pair{1, 1}, {1, 7}, {7, 1}, {4, 4}, {12, 5}, {5, 40}, {30, 300}}) {
    const Matrix a = random_matrix(r, c, gen, 3.0);
    const auto d = svd(a);
    EXPECT_LT(frobenius_norm(reconstruct(d) - a) / frobenius_norm(a), 1e-8) << r << "x" << c;
    EXPECT_LT(orthonormality_error_cols(d.u), 1e-10);
    EXPECT_LT(orthonormality_error_cols(d.vt.transposed()), 1e-10);
    for (std::size_t i = 1; i < d.s.size(); ++i) EXPECT_GE(d.s[i - 1], d.s[i]);
  }
}

TEST(Svd, RankDeficientInputStillOrthonormal) {
  std::mt19937_64 gen(5);
  const Matrix b = random_matrix(6, 2, gen);
  const Matrix a = b * random_matrix(2, 9, gen);  // rank 2
  const auto d = svd(a);
  EXPECT_LT(orthonormality_error_cols(d.u), 1e-10);
  EXPECT_LT(orthonormality_error_cols(d.vt.transposed()), 1e-10);
  EXPECT_LT(d.s[2], 1e-12 * d.s[0]);
  EXPECT_LT(frobenius_norm(reconstruct(d) - a) / frobenius_norm(a), 1e-8);

  const auto z = svd(Matrix(3, 4, 0.0));
  EXPECT_LT(orthonormality_error_cols(z.u), 1e-12);
  for (double s : z.s) EXPECT_EQ(s, 0.0);
}

TEST(Svd, SignConventionAndDeterminism) {
  std::mt19937_64 gen(8);
  const Matrix a = random_matrix(6, 10, gen);
  const auto d1 = svd(a);
  const auto d2 = svd(a);
  EXPECT_EQ(d1.u, d2.u);
  EXPECT_EQ(d1.vt, d2.vt);
  EXPECT_EQ(d1.s, d2.s);
  for (std::size_t k = 0; k < d1.u.cols(); ++k) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d1.u.rows(); ++i)
      if (std::abs(d1.u(i, k)) > std::abs(d1.u(arg, k))) arg = i;
    EXPECT_GE(d1.u(arg, k), 0.0);
  }
}

TEST(Svd, RejectsNonFinite) {
  Matrix a = Matrix::identity(2);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(code_of([&] { svd(a); }), Errc::non_finite);
}

TEST(TruncateByVariance, HandComputedCases) {
  EXPECT_EQ(truncate_by_variance(std::vector{1.0, 0.0}, 0.99), 1u);
  EXPECT_EQ(truncate_by_variance(std::vector{3.0, 1.0}, 0.99), 2u);
  EXPECT_EQ(truncate_by_variance(std::vector{1.0, 1.0, 1.0, 1.0}, 0.5), 2u);
  EXPECT_EQ(truncate_by_variance(std::vector{3.0, 1.0}, 0.9), 1u);
  EXPECT_EQ(truncate_by_variance(std::vector{2.0, 1.0, 1e-3}, 1.0), 3u);
}

TEST(TruncateByVariance, MonotoneInFraction) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + gen() % 12);
    for (double& v : s) v = u(gen);
    std::sort(s.begin(), s.end(), std::greater<>());
    double f1 = u(gen) * 0.999 + 0.001, f2 = u(gen) * 0.999 + 0.001;
    if (f1 > f2) std::swap(f1, f2);
    const auto k1 = truncate_by_variance(s, f1);
    const auto k2 = truncate_by_variance(s, f2);
    EXPECT_LE(k1, k2);
    EXPECT_GE(k1, 1u);
    EXPECT_LE(k2, s.size());
  }
}

TEST(TruncateByVariance, Errors) {
  EXPECT_EQ(code_of([] { truncate_by_variance(std::vector{0.0, 0.0}, 0.5); }), Errc::no_variance);
  EXPECT_EQ(code_of([] { truncate_by_variance(std::vector{1.0}, 0.0); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { truncate_by_variance(std::vector{1.0, 2.0}, 0.5); }),
            Errc::invalid_argument);
}

TEST(InvSqrtPsd, HandComputedCases) {
  EXPECT_EQ(inv_sqrt_psd(Matrix::identity(3), 1e-12), Matrix::identity(3));

  const Matrix r = inv_sqrt_psd(Matrix{{4.0, 0.0}, {0.0, 1.0}}, 1e-12);
  EXPECT_NEAR(r(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(r(1, 1), 1.0, 1e-15);
  EXPECT_NEAR(r(0, 1), 0.0, 1e-15);

  const Matrix z = inv_sqrt_psd(Matrix{{4.0, 0.0}, {0.0, 0.0}}, 1e-12);
  EXPECT_NEAR(z(0, 0), 0.5, 1e-15);
  EXPECT_EQ(z(1, 1), 0.0);
}

TEST(InvSqrtPsd, ProjectorAndInverseProperties) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = random_matrix(5, 40, gen);
    const Matrix c = multiply_transposed(x, x);
    const Matrix r = inv_sqrt_psd(c, 1e-12);
    EXPECT_LT(max_abs(r * c * r - Matrix::identity(5)), 1e-8);
    // Applying the whitener twice recovers the inverse.
    const Matrix inv = r * r;
    EXPECT_LT(max_abs(inv * c - Matrix::identity(5)), 1e-6);
  }
  // Rank-deficient: r c r is the projector onto the range of c.
  const Matrix b = random_matrix(4, 2, gen);
  const Matrix c = multiply_transposed(b, b);
  const Matrix r = inv_sqrt_psd(c, 1e-10);
  const Matrix proj = r * c * r;
  EXPECT_LT(max_abs(proj * proj - proj), 1e-8);
  EXPECT_LT(max_abs(proj * b - b), 1e-8);
}

TEST(InvSqrtPsd, RejectsAsymmetric) {
  EXPECT_EQ(code_of([] { inv_sqrt_psd(Matrix{{1.0, 0.5}, {0.0, 1.0}}, 1e-12); }),
            Errc::asymmetric);
  EXPECT_EQ(code_of([] { inv_sqrt_psd(Matrix{{1.0, 0.0}, {0.0, -1.0}}, 1e-12); }), Errc::not_psd);
}

TEST(Pearson, TrivialCases) {
  const std::vector<double> x{1, 2, 3, 5, 8};
  std::vector<double> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
  EXPECT_DOUBLE_EQ(pearson(x, x), 1.0);
  EXPECT_DOUBLE_EQ(pearson(x, neg), -1.0);
}

TEST(Pearson, MatchesTwoPassOracle) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{1, 2, 3, 10};
  EXPECT_NEAR(pearson(x, y), testing::pearson_two_pass(x, y), 1e-12);
}

TEST(Pearson, AffineEquivariance) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(20), y(20), xa(20), ya(20);
    for (auto& v : x) v = d(gen);
    for (auto& v : y) v = d(gen);
    const double a = d(gen) * 3, b = d(gen), c = d(gen) * 3, e = d(gen);
    for (std::size_t i = 0; i < x.size(); ++i) {
      xa[i] = a * x[i] + b;
      ya[i] = c * y[i] + e;
    }
    const double sign = (a * c > 0) ? 1.0 : -1.0;
    EXPECT_NEAR(pearson(xa, ya), sign * pearson(x, y), 1e-12);
  }
}

TEST(Pearson, DistinctErrors) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_EQ(code_of([&] { pearson(x, std::vector<double>{1, 2}); }), Errc::length_mismatch);
  EXPECT_EQ(code_of([&] { pearson(x, std::vector<double>{4, 4, 4}); }), Errc::constant_series);
}

}  // namespace
}  // namespace rmpm::linalg
