#include "rmpm/multiplicity/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "rmpm/error.hpp"
#include "rmpm/linalg/linalg.hpp"

namespace rmpm::multiplicity {

bool RiskBand::contains(double accuracy) const noexcept {
  return std::abs(accuracy - target_accuracy) < epsilon;
}

std::vector<double> per_sample_pm(const PredictionTable& t, PmMode mode) {
  require(t.variants() >= 2, Errc::invalid_argument, "PM needs at least two variants");
  const std::size_t k_count = t.variants();
  const double k = static_cast<double>(k_count);
  std::vector<double> out(t.samples());

  for (std::size_t n = 0; n < t.samples(); ++n) {
    if (mode == PmMode::labels) {
      double mean = 0.0;
      for (std::size_t v = 0; v < k_count; ++v) mean += static_cast<double>(t.label(v, n));
      mean /= k;
      double var = 0.0;
      for (std::size_t v = 0; v < k_count; ++v) {
        const double d = static_cast<double>(t.label(v, n)) - mean;
        var += d * d;
      }
      out[n] = std::sqrt(var / k);
      continue;
    }
    double var_sum = 0.0;
    for (std::size_t c = 0; c < t.classes(); ++c) {
      // Shifted by the first variant so identical rows give exactly 0.
      const double x0 = t.prob(0, n, c);
      double mean = 0.0;
      for (std::size_t v = 0; v < k_count; ++v) mean += t.prob(v, n, c) - x0;
      mean /= k;
      double var = 0.0;
      for (std::size_t v = 0; v < k_count; ++v) {
        const double d = t.prob(v, n, c) - x0 - mean;
        var += d * d;
      }
      var_sum += var / k;
    }
    out[n] = std::sqrt(var_sum / static_cast<double>(t.classes()));
  }
  return out;
}

double mean_over(std::span<const double> per_sample,
                 std::optional<std::span<const std::size_t>> subset) {
  if (!subset) {
    require(!per_sample.empty(), Errc::empty_input, "no samples");
    double acc = 0.0;
    for (double v : per_sample) acc += v;
    return acc / static_cast<double>(per_sample.size());
  }
  require(!subset->empty(), Errc::empty_input, "empty sample subset");
  double acc = 0.0;
  for (std::size_t i : *subset) {
    require(i < per_sample.size(), Errc::invalid_argument, "subset index out of range");
    acc += per_sample[i];
  }
  return acc / static_cast<double>(subset->size());
}

double pm(const PredictionTable& t, std::optional<std::span<const std::size_t>> subset,
          PmMode mode) {
  if (subset) require(!subset->empty(), Errc::empty_input, "empty sample subset");
  const auto values = per_sample_pm(t, mode);
  return mean_over(values, subset);
}

double rm_pair(const svcca::ActivationMatrix& z1, const svcca::ActivationMatrix& z2,
               const svcca::SvccaConfig& cfg) {
  const auto spectrum = svcca::svcca_correlations(z1, z2, cfg.variance_fraction);
  return -svcca::svcca_similarity(spectrum, cfg.top_t);
}

double rm_ensemble(std::span<const svcca::ActivationMatrix> zs, const svcca::SvccaConfig& cfg) {
  require(zs.size() >= 2, Errc::invalid_argument, "RM needs at least two variants");
  std::vector<svcca::Subspace> reduced;
  reduced.reserve(zs.size());
  for (const auto& z : zs) reduced.push_back(svcca::reduce(z, cfg.variance_fraction));

  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < reduced.size(); ++i) {
    for (std::size_t j = i + 1; j < reduced.size(); ++j) {
      const auto spectrum = svcca::svcca_correlations(reduced[i], reduced[j]);
      acc += -svcca::svcca_similarity(spectrum, cfg.top_t);
      ++pairs;
    }
  }
  return acc / static_cast<double>(pairs);
}

std::vector<ConfabulationEntry> confabulation_scores(const PredictionTable& t) {
  require(t.variants() >= 2, Errc::invalid_argument, "confabulation needs at least two variants");
  const auto pm_values = per_sample_pm(t);
  const double k = static_cast<double>(t.variants());

  std::vector<ConfabulationEntry> out(t.samples());
  std::vector<std::size_t> sorted_counts;
  for (std::size_t n = 0; n < t.samples(); ++n) {
    auto& e = out[n];
    e.sample_index = n;
    e.pm = pm_values[n];
    e.label_histogram.assign(t.classes(), 0);
    for (std::size_t v = 0; v < t.variants(); ++v) ++e.label_histogram[t.label(v, n)];

    // Summing over sorted counts makes the score independent of class order.
    sorted_counts = e.label_histogram;
    std::sort(sorted_counts.begin(), sorted_counts.end(), std::greater<>());
    double h = 0.0;
    for (std::size_t count : sorted_counts) {
      if (count == 0) break;
      ++e.distinct_labels;
      const double p = static_cast<double>(count) / k;
      h -= p * std::log(p);
    }
    e.score = e.distinct_labels == 1 ? 0.0 : h;
  }
  return out;
}

TopConfabulators top_confabulators(std::span<const ConfabulationEntry> entries, std::size_t n) {
  require(n >= 1, Errc::invalid_argument, "top-n needs n >= 1");
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    const auto& x = entries[a];
    const auto& y = entries[b];
    if (x.score != y.score) return x.score > y.score;
    if (x.pm != y.pm) return x.pm > y.pm;
    return x.sample_index < y.sample_index;
  };

  TopConfabulators out;
  const std::size_t take = std::min(n, entries.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    better);
  out.indices.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.indices.push_back(entries[order[i]].sample_index);
  if (n > entries.size()) {
    out.truncated = true;
    out.note = "requested " + std::to_string(n) + " confabulators, only " +
               std::to_string(entries.size()) + " samples available";
  }
  return out;
}

double pcc_rm_pm(std::span<const double> svcca_values, std::span<const double> pm_values) {
  return linalg::pearson(svcca_values, pm_values);
}

}  // namespace rmpm::multiplicity
