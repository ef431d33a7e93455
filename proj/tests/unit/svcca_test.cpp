#include "rmpm/svcca/svcca.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "rmpm/error.hpp"
#include "rmpm/linalg/linalg.hpp"

namespace rmpm::svcca {
namespace {

using testing::random_matrix;

ActivationMatrix act(Matrix m, std::uint64_t fp = 42, std::string name = "fc1") {
  return ActivationMatrix{std::move(name), fp, std::move(m)};
}

// q * z + per-row offsets.
Matrix affine(const Matrix& q, const Matrix& z, std::mt19937_64& gen) {
  Matrix out = q * z;
  std::normal_distribution<double> d(0.0, 5.0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double b = d(gen);
    for (double& v : out.row(r)) v += b;
  }
  return out;
}

Matrix well_conditioned(std::size_t m, std::mt19937_64& gen) {
  Matrix q = random_matrix(m, m, gen, 0.3);
  for (std::size_t i = 0; i < m; ++i) q(i, i) += 2.0;
  return q;
}

TEST(CenterRows, Examples) {
  const auto a = center_rows(act(Matrix{{1, 1, 1}, {0, 2, 4}}, 9, "cnn"));
  EXPECT_EQ(a.values, (Matrix{{0, 0, 0}, {-2, 0, 2}}));
  EXPECT_EQ(a.layer_name, "cnn");
  EXPECT_EQ(a.fingerprint, 9u);
  EXPECT_EQ(center_rows(act(Matrix{{0, 2}})).values, (Matrix{{-1, 1}}));

  std::mt19937_64 gen(1);
  const auto c = center_rows(act(random_matrix(4, 50, gen, 10.0)));
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0;
    for (double v : c.values.row(r)) mean += v;
    EXPECT_LT(std::abs(mean / 50), 1e-12);
  }
}

TEST(SvccaCorrelations, IdenticalInputsCorrelatePerfectly) {
  std::mt19937_64 gen(2);
  const auto z = act(random_matrix(8, 300, gen));
  const auto spec = svcca_correlations(z, z);
  for (double r : spec.correlations) EXPECT_NEAR(r, 1.0, 1e-8);
  EXPECT_FALSE(spec.rank_deficient);
}

TEST(SvccaCorrelations, AffineCopyCorrelatesPerfectly) {
  std::mt19937_64 gen(3);
  const Matrix z = random_matrix(6, 500, gen);
  const auto spec = svcca_correlations(act(z), act(affine(well_conditioned(6, gen), z, gen)));
  EXPECT_EQ(spec.correlations.size(), std::min(spec.k1, spec.k2));
  for (double r : spec.correlations) EXPECT_NEAR(r, 1.0, 1e-6);
}

TEST(SvccaCorrelations, SingleNeuronEqualsAbsolutePearson) {
  std::mt19937_64 gen(4);
  const Matrix a = random_matrix(1, 200, gen);
  Matrix b = random_matrix(1, 200, gen);
  for (std::size_t i = 0; i < 200; ++i) b(0, i) -= 0.7 * a(0, i);
  const auto spec = svcca_correlations(act(a), act(b));
  ASSERT_EQ(spec.correlations.size(), 1u);
  const std::span<const double> ra = a.row(0), rb = b.row(0);
  EXPECT_NEAR(spec.correlations[0], std::abs(linalg::pearson(ra, rb)), 1e-10);
}

CcaSpectrum spectrum(std::vector<double> r) {
  CcaSpectrum s;
  s.k1 = s.k2 = r.size();
  s.correlations = std::move(r);
  return s;
}

TEST(SvccaSimilarity, Examples) {
  EXPECT_DOUBLE_EQ(svcca_similarity(spectrum({1, 1, 1}), 20), 1.0);
  EXPECT_DOUBLE_EQ(svcca_similarity(spectrum({0.9, 0.5, 0.1}), 2), 0.7);
  EXPECT_DOUBLE_EQ(svcca_similarity(spectrum({0.8}), 20), 0.8);
  EXPECT_THROW(svcca_similarity(CcaSpectrum{}, 20), Error);
  EXPECT_THROW(svcca_similarity(spectrum({0.5}), 0), Error);
}

TEST(SvccaCorrelations, Symmetric) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = act(random_matrix(7, 200, gen));
    Matrix mixed = random_matrix(5, 7, gen) * a.values + random_matrix(5, 200, gen);
    const auto b = act(mixed);
    const auto ab = svcca_correlations(a, b);
    const auto ba = svcca_correlations(b, a);
    ASSERT_EQ(ab.correlations.size(), ba.correlations.size());
    for (std::size_t i = 0; i < ab.correlations.size(); ++i)
      EXPECT_NEAR(ab.correlations[i], ba.correlations[i], 1e-8);
  }
}

TEST(SvccaCorrelations, AffineInvarianceOnEitherSide) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = random_matrix(6, 400, gen);
    const Matrix b = random_matrix(4, 6, gen) * a + random_matrix(4, 400, gen, 0.8);
    for (double fraction : {1.0, 0.99}) {
      const auto base = svcca_correlations(act(a), act(b), fraction);
      const auto left =
          svcca_correlations(act(affine(well_conditioned(6, gen), a, gen)), act(b), fraction);
      const auto right =
          svcca_correlations(act(a), act(affine(well_conditioned(4, gen), b, gen)), fraction);
      if (fraction == 1.0 || (left.k1 == base.k1 && right.k2 == base.k2)) {
        ASSERT_EQ(base.correlations.size(), left.correlations.size());
        ASSERT_EQ(base.correlations.size(), right.correlations.size());
        for (std::size_t i = 0; i < base.correlations.size(); ++i) {
          EXPECT_NEAR(left.correlations[i], base.correlations[i], 1e-6);
          EXPECT_NEAR(right.correlations[i], base.correlations[i], 1e-6);
        }
      }
    }
  }
}

TEST(SvccaCorrelations, NeuronPermutationInvariance) {
  std::mt19937_64 gen(7);
  const Matrix a = random_matrix(6, 300, gen);
  const Matrix b = random_matrix(6, 6, gen) * a + random_matrix(6, 300, gen);
  Matrix shuffled(6, 300);
  const std::size_t perm[] = {3, 0, 5, 1, 4, 2};
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 300; ++c) shuffled(r, c) = b(perm[r], c);
  const auto x = svcca_correlations(act(a), act(b));
  const auto y = svcca_correlations(act(a), act(shuffled));
  ASSERT_EQ(x.correlations.size(), y.correlations.size());
  for (std::size_t i = 0; i < x.correlations.size(); ++i)
    EXPECT_NEAR(x.correlations[i], y.correlations[i], 1e-10);
}

TEST(SvccaCorrelations, IndependentMatricesAreWeaklyCorrelated) {
  std::mt19937_64 gen(8);
  double total = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = svcca_correlations(act(random_matrix(10, 2000, gen)),
                                         act(random_matrix(10, 2000, gen)));
    double mean = 0.0;
    for (double r : spec.correlations) {
      EXPECT_GE(r, 0.0);
      EXPECT_LE(r, 1.0);
      mean += r;
    }
    total += mean / static_cast<double>(spec.correlations.size());
  }
  EXPECT_LT(total / 20.0, 0.3);
}

TEST(SvccaCorrelations, TopCorrelationMatchesDirectMaximization) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t p = 1 + trial % 3, q = 1 + (trial / 3) % 3;
    const Matrix shared = random_matrix(1, 150, gen);
    Matrix x = random_matrix(p, 150, gen);
    Matrix y = random_matrix(q, 150, gen);
    for (std::size_t c = 0; c < 150; ++c) {
      x(0, c) += shared(0, c);
      y(q - 1, c) += 0.8 * shared(0, c);
    }
    const auto spec = svcca_correlations(act(x), act(y), 1.0);
    const double oracle = testing::max_projection_correlation(x, y, 100 + trial);
    EXPECT_NEAR(spec.correlations.front(), oracle, 1e-4);
  }
}

TEST(SvccaCorrelations, DuplicateNeuronsStayWellDefined) {
  std::mt19937_64 gen(10);
  Matrix a = random_matrix(4, 100, gen);
  for (std::size_t c = 0; c < 100; ++c) a(3, c) = a(0, c);
  const auto spec = svcca_correlations(act(a), act(a), 1.0);
  EXPECT_NEAR(spec.correlations.front(), 1.0, 1e-8);
  for (double r : spec.correlations) EXPECT_TRUE(std::isfinite(r));
}

TEST(SvccaCorrelations, AlignmentAndRankChecks) {
  std::mt19937_64 gen(11);
  const auto a = act(random_matrix(3, 50, gen), 1);
  const auto b = act(random_matrix(3, 50, gen), 2);
  try {
    svcca_correlations(a, b);
    FAIL() << "expected alignment error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::alignment);
    EXPECT_NE(std::string(e.what()).find("sample alignment violated"), std::string::npos);
  }
  const auto wide = act(random_matrix(8, 6, gen));
  const auto spec = svcca_correlations(wide, wide, 1.0);
  EXPECT_TRUE(spec.rank_deficient);
  EXPECT_FALSE(spec.warning.empty());
}

TEST(SelectSamples, SubsetsOfSameParentStayAligned) {
  std::mt19937_64 gen(12);
  const auto a = act(random_matrix(3, 40, gen), 77);
  const auto b = act(random_matrix(3, 40, gen), 77);
  const std::vector<std::size_t> idx{0, 5, 9, 13, 21, 39};
  const auto sa = select_samples(a, idx);
  const auto sb = select_samples(b, idx);
  EXPECT_EQ(sa.fingerprint, sb.fingerprint);
  EXPECT_NE(sa.fingerprint, a.fingerprint);
  EXPECT_EQ(sa.samples(), idx.size());
  EXPECT_EQ(sa.values(1, 2), a.values(1, 9));
  EXPECT_NO_THROW(svcca_correlations(sa, sb, 1.0));
}

}  // namespace
}  // namespace rmpm::svcca
