#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmpm/multiplicity/prediction_table.hpp"
#include "rmpm/svcca/svcca.hpp"

namespace rmpm::multiplicity {

// How the spread of h(x) across variants is measured.
enum class PmMode {
  probabilities,  // per-class population variance of softmax outputs, averaged over classes
  labels,         // population variance of the predicted class index (comparison only)
};

// Accuracy window inside which variants count as risk-equivalent.
struct RiskBand {
  double target_accuracy = 0.0;
  double epsilon = 0.01;

  bool contains(double accuracy) const noexcept;
};

// sqrt of the across-variant variance, one entry per sample.
std::vector<double> per_sample_pm(const PredictionTable& t, PmMode mode = PmMode::probabilities);

// Mean per-sample PM over `subset` (all samples when absent).
double pm(const PredictionTable& t, std::optional<std::span<const std::size_t>> subset = {},
          PmMode mode = PmMode::probabilities);
double mean_over(std::span<const double> per_sample,
                 std::optional<std::span<const std::size_t>> subset = {});

// Pairwise representational multiplicity, in [-1, 0].
double rm_pair(const svcca::ActivationMatrix& z1, const svcca::ActivationMatrix& z2,
               const svcca::SvccaConfig& cfg = {});

// Mean of rm_pair over all unordered variant pairs, accumulated in (i, j)
// lexicographic order.
double rm_ensemble(std::span<const svcca::ActivationMatrix> zs, const svcca::SvccaConfig& cfg = {});

struct ConfabulationEntry {
  std::size_t sample_index = 0;
  double score = 0.0;                       // label-histogram entropy, nats
  std::vector<std::size_t> label_histogram;  // per class, sums to K
  std::size_t distinct_labels = 0;
  double pm = 0.0;                          // per-sample PM, used for tie-breaking
};

std::vector<ConfabulationEntry> confabulation_scores(const PredictionTable& t);

struct TopConfabulators {
  std::vector<std::size_t> indices;
  bool truncated = false;
  std::string note;
};

// Highest scores first; ties by higher PM, then lower sample index.
TopConfabulators top_confabulators(std::span<const ConfabulationEntry> entries, std::size_t n);

// Correlation of per-strategy SVCCA similarity with per-strategy PM.
// Aligned representations and predictions show up as a negative value.
double pcc_rm_pm(std::span<const double> svcca_values, std::span<const double> pm_values);

}  // namespace rmpm::multiplicity
