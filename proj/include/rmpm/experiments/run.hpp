#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rmpm/experiments/config.hpp"
#include "rmpm/multiplicity/prediction_table.hpp"
#include "rmpm/svcca/svcca.hpp"
#include "rmpm/trainer/dataset.hpp"
#include "rmpm/trainer/network.hpp"
#include "rmpm/trainer/train.hpp"
#include "rmpm/trainer/transforms.hpp"

namespace rmpm::experiments {

struct OodSet {
  std::string name;
  trainer::Dataset data;
};

struct Datasets {
  trainer::Dataset train;
  trainer::Dataset test;
  std::vector<OodSet> ood;
};

Datasets build_datasets(const ExperimentConfig& cfg);
trainer::NetworkSpec build_network(const ExperimentConfig& cfg, const Datasets& d);

struct VariantRecord {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  std::size_t epochs = 0;
  std::size_t steps = 0;
  std::vector<double> checkpoint;                // flat model parameters
  linalg::Matrix probs_iid;                      // samples x classes
  std::map<std::string, linalg::Matrix> probs_ood;
  std::map<std::string, svcca::ActivationMatrix> taps;  // neurons x samples
};

struct EnsembleRun {
  trainer::TrainingStrategy strategy;
  std::uint64_t test_fingerprint = 0;
  std::map<std::string, std::uint64_t> ood_fingerprints;
  std::vector<VariantRecord> variants;  // in seed order
  std::vector<std::uint64_t> failed_seeds;
  std::string note;
  double pseudo_max_accuracy = -1.0;  // set in pseudo_max mode
  std::size_t order = 0;              // position within its sweep

  bool complete() const { return failed_seeds.empty() && variants.size() >= 2; }
  std::vector<std::string> ood_names() const;
  std::vector<std::string> tap_names() const;
  multiplicity::PredictionTable iid_table() const;
  multiplicity::PredictionTable ood_table(const std::string& name) const;
  std::vector<svcca::ActivationMatrix> tap(const std::string& name) const;
};

struct RunOptions {
  std::size_t jobs = 1;
  // When set, variants are written under <store>/<strategy>/seed_<s>/ and
  // reused on later runs with the same configuration.
  std::optional<std::filesystem::path> store;
};

// Trains every seed of `strategy` and captures i.i.d./OOD predictions and tap
// activations on the test sets. Seeds that miss the band are listed in
// failed_seeds rather than aborting the run.
EnsembleRun run_strategy(const trainer::TrainingStrategy& strategy, const trainer::NetworkSpec& spec,
                         const Datasets& data, const RunOptions& opts = {});

// One run per strategy of the config. A failure in one strategy is recorded in
// that run's note and does not stop the others.
std::vector<EnsembleRun> sweep_regime(const ExperimentConfig& cfg, const trainer::NetworkSpec& spec,
                                      const Datasets& data, const RunOptions& opts = {});

// Run-directory persistence.
void save_run(const EnsembleRun& run, const std::filesystem::path& root);
EnsembleRun load_run(const std::filesystem::path& strategy_dir);
// Every strategy directory under `root`, by sweep order then name.
std::vector<EnsembleRun> load_runs(const std::filesystem::path& root);

// Calls f(i) for every i < count on at most `jobs` threads. The first
// exception thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& f);

}  // namespace rmpm::experiments
