#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rmpm/experiments/run.hpp"
#include "rmpm/io/report.hpp"
#include "rmpm/multiplicity/metrics.hpp"

namespace rmpm::experiments {

// Per-strategy numbers behind one CSV row. Undefined values are NaN.
struct StrategySummary {
  std::string strategy;
  trainer::Regime regime = trainer::Regime::learning_rate;
  double regime_value = 0.0;
  std::size_t variants = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;             // sample std (K - 1)
  std::map<std::string, double> svcca;   // mean pairwise similarity per tap
  double pm_iid = 0.0;
  std::map<std::string, double> pm_ood;
  std::string note;
};

StrategySummary summarize(const EnsembleRun& run, const svcca::SvccaConfig& cfg = {});

struct Hyp1Entry {
  std::string strategy;
  double rm_sub = 0.0;   // rm_ensemble on the low-PM subset, in [-1, 0]
  double rm_dist = 0.0;  // 1 + rm_sub: representational distance, grows with RM
  double pm_sub = 0.0;
  double pm_full = 0.0;
  double rm_scaled = 0.0;
  double pm_sub_scaled = 0.0;
  double pm_full_scaled = 0.0;
  double e_rm = 0.0;
  double e_pm = 0.0;
  std::vector<std::size_t> subset;
};

struct Hyp1Report {
  std::string tap;
  std::size_t subset_size = 0;
  std::vector<Hyp1Entry> entries;
  std::vector<std::string> excluded;  // "name: reason"
  double c = 0.0;        // 1 / max rm_dist
  double c_prime = 0.0;  // 1 / max pm_full
  double c_dprime = 0.0; // 1 / max pm_sub
  double mean_e_rm = 0.0;
  double mean_e_pm = 0.0;
  bool verdict = false;  // mean_e_rm < mean_e_pm
  // Pearson correlation with pm_full across included runs (NaN below 3 runs
  // or on constant series), on raw and on scaled series.
  double pcc_rm_raw = 0.0, pcc_rm_scaled = 0.0;
  double pcc_pm_raw = 0.0, pcc_pm_scaled = 0.0;
};

// `subset_size` 0 picks min(1000, N / 4).
std::size_t default_subset_size(std::size_t samples);

// Lowest-PM samples, ties by index; a pure function of per-sample PM.
std::vector<std::size_t> low_pm_subset(std::span<const double> per_sample, std::size_t size);

Hyp1Report hypothesis1(std::span<const EnsembleRun> runs, std::size_t subset_size, const std::string& tap,
                       const svcca::SvccaConfig& cfg = {});

struct CorrelationEntry {
  std::string condition;  // "iid" or an OOD name
  double pcc = 0.0;       // NaN when undefined
};

struct CorrelationReport {
  std::string tap;
  std::vector<CorrelationEntry> entries;
  double delta_svcca = 0.0;  // max - min SVCCA over strategies
};

// Pearson over strategies of SVCCA at `tap` against PM, for i.i.d. and every
// OOD condition. Needs at least 3 strategies.
CorrelationReport correlation_report(std::span<const StrategySummary> summaries, const std::string& tap);

enum class ConfabPool { per_strategy, pooled };

struct ConfabGroup {
  std::string name;  // strategy name or "pooled"
  std::size_t variants = 0;
  std::vector<multiplicity::ConfabulationEntry> top;
  bool degenerate = false;  // every sample received one label
  std::string note;
};

std::vector<ConfabGroup> confabulation_report(std::span<const EnsembleRun> runs, ConfabPool pool,
                                              std::size_t n = 16);

// Assembles CSV rows and the JSON summary.
io::ReportBundle build_bundle(std::span<const StrategySummary> summaries,
                              const std::vector<CorrelationReport>& correlations, const Hyp1Report* hyp1,
                              const std::vector<ConfabGroup>& confab);

// Full pipeline over finished runs: summaries, a correlation report per tap
// (3+ strategies), Hypothesis 1 at cfg.hyp1_tap (2+ strategies) and pooled
// confabulation listing.
io::ReportBundle analyze_runs(std::span<const EnsembleRun> runs, const AnalysisConfig& cfg);

nlohmann::ordered_json to_json(const Hyp1Report& r);
nlohmann::ordered_json to_json(const CorrelationReport& r);
nlohmann::ordered_json to_json(const ConfabGroup& g);

}  // namespace rmpm::experiments
