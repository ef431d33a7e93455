#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rmpm/linalg/matrix.hpp"

namespace rmpm::multiplicity {

// Output probabilities of K model variants over N samples and C classes.
// Labels are the per-row argmax, ties going to the lowest class index.
class PredictionTable {
 public:
  PredictionTable(std::size_t variants, std::size_t samples, std::size_t classes,
                  std::vector<double> probs, std::uint64_t fingerprint);

  // One N x C probability matrix per variant.
  static PredictionTable from_variants(std::span<const linalg::Matrix> per_variant,
                                       std::uint64_t fingerprint);

  // Concatenates the variants of several tables over the same samples.
  static PredictionTable pooled(std::span<const PredictionTable> tables);

  std::size_t variants() const noexcept { return variants_; }
  std::size_t samples() const noexcept { return samples_; }
  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }

  double prob(std::size_t k, std::size_t n, std::size_t c) const noexcept {
    return probs_[(k * samples_ + n) * classes_ + c];
  }
  std::span<const double> row(std::size_t k, std::size_t n) const noexcept {
    return {probs_.data() + (k * samples_ + n) * classes_, classes_};
  }
  std::size_t label(std::size_t k, std::size_t n) const noexcept {
    return labels_[k * samples_ + n];
  }

  const std::vector<double>& probs() const noexcept { return probs_; }

 private:
  std::size_t variants_;
  std::size_t samples_;
  std::size_t classes_;
  std::vector<double> probs_;
  std::vector<std::size_t> labels_;
  std::uint64_t fingerprint_;
};

}  // namespace rmpm::multiplicity
