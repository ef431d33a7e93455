#include "rmpm/multiplicity/prediction_table.hpp"

#include <cmath>
#include <string>

#include "rmpm/error.hpp"

namespace rmpm::multiplicity {

PredictionTable::PredictionTable(std::size_t variants, std::size_t samples, std::size_t classes,
                                 std::vector<double> probs, std::uint64_t fingerprint)
    : variants_(variants),
      samples_(samples),
      classes_(classes),
      probs_(std::move(probs)),
      fingerprint_(fingerprint) {
  require(variants_ >= 1 && samples_ >= 1 && classes_ >= 1, Errc::empty_input,
          "prediction table needs at least one variant, sample and class");
  require(probs_.size() == variants_ * samples_ * classes_, Errc::shape_mismatch,
          "prediction table size does not match K x N x C");
  labels_.resize(variants_ * samples_);
  for (std::size_t k = 0; k < variants_; ++k) {
    for (std::size_t n = 0; n < samples_; ++n) {
      const auto p = row(k, n);
      double sum = 0.0;
      std::size_t best = 0;
      for (std::size_t c = 0; c < classes_; ++c) {
        if (!std::isfinite(p[c]) || p[c] < 0.0 || p[c] > 1.0) {
          fail(Errc::invalid_argument, "probability outside [0,1] at variant " +
                                           std::to_string(k) + ", sample " + std::to_string(n));
        }
        sum += p[c];
        if (p[c] > p[best]) best = c;
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        fail(Errc::invalid_argument, "probabilities of variant " + std::to_string(k) +
                                         ", sample " + std::to_string(n) + " sum to " +
                                         std::to_string(sum));
      }
      labels_[k * samples_ + n] = best;
    }
  }
}

PredictionTable PredictionTable::from_variants(std::span<const linalg::Matrix> per_variant,
                                               std::uint64_t fingerprint) {
  require(!per_variant.empty(), Errc::empty_input, "no variants");
  const std::size_t n = per_variant.front().rows();
  const std::size_t c = per_variant.front().cols();
  std::vector<double> probs;
  probs.reserve(per_variant.size() * n * c);
  for (const auto& m : per_variant) {
    require(m.rows() == n && m.cols() == c, Errc::shape_mismatch,
            "variant prediction matrices differ in shape");
    probs.insert(probs.end(), m.storage().begin(), m.storage().end());
  }
  return PredictionTable(per_variant.size(), n, c, std::move(probs), fingerprint);
}

PredictionTable PredictionTable::pooled(std::span<const PredictionTable> tables) {
  require(!tables.empty(), Errc::empty_input, "no tables to pool");
  const auto& first = tables.front();
  std::vector<double> probs;
  std::size_t variants = 0;
  for (const auto& t : tables) {
    if (t.fingerprint() != first.fingerprint() || t.samples() != first.samples() ||
        t.classes() != first.classes()) {
      fail(Errc::alignment, "pooled prediction tables cover different samples");
    }
    probs.insert(probs.end(), t.probs().begin(), t.probs().end());
    variants += t.variants();
  }
  return PredictionTable(variants, first.samples(), first.classes(), std::move(probs),
                         first.fingerprint());
}

}  // namespace rmpm::multiplicity
