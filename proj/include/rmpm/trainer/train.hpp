#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmpm/multiplicity/metrics.hpp"
#include "rmpm/trainer/dataset.hpp"
#include "rmpm/trainer/network.hpp"

namespace rmpm::trainer {

enum class Regime { learning_rate, batch_size };
enum class StopMode { risk_band, pseudo_max };

std::string to_string(Regime r);
Regime parse_regime(std::string_view s);
std::string to_string(StopMode m);
StopMode parse_stop_mode(std::string_view s);

struct TrainingStrategy {
  std::string name;
  Regime regime = Regime::learning_rate;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::vector<std::uint64_t> seeds;
  StopMode stopping = StopMode::risk_band;
  multiplicity::RiskBand band{0.9, 0.01};
  std::size_t max_epochs = 20;
  // Extra evaluation every this many steps (0 = only the default cadence).
  std::size_t eval_every_steps = 0;

  // The swept value: learning rate or batch size.
  double regime_value() const;
  void validate() const;
};

// Evaluations happen after every epoch, every 200 steps when batch_size >= 256,
// and every `eval_every_steps` steps when that is set.
bool is_eval_step(const TrainingStrategy& s, std::size_t step);

struct StopRule {
  enum class Kind {
    band,      // first evaluation with |acc - target| < eps
    at_least,  // first evaluation with acc >= target
    best,      // train max_epochs, keep the best evaluated checkpoint
  };
  Kind kind = Kind::band;
  double target = 0.0;
  double epsilon = 0.01;
};

struct VariantResult {
  std::uint64_t seed = 0;
  Model model;
  double accuracy = 0.0;       // test accuracy of the returned checkpoint
  double best_accuracy = 0.0;  // best test accuracy seen at any evaluation
  std::size_t epochs = 0;      // epochs started when the checkpoint was taken
  std::size_t steps = 0;
};

// Trains one seed under `rule`. Band and at_least rules that never fire
// raise Errc::target_unreachable with the best accuracy in the message.
VariantResult train_with_rule(const TrainingStrategy& strategy, std::uint64_t seed,
                              const NetworkSpec& spec, const Dataset& train, const Dataset& test,
                              const StopRule& rule);

// Risk-band mode of `strategy`. Pseudo-max needs all seeds; see pseudo_max_target.
VariantResult train_variant(const TrainingStrategy& strategy, std::uint64_t seed,
                            const NetworkSpec& spec, const Dataset& train, const Dataset& test);

// Highest accuracy reached by at least min(quorum, count) of the given per-seed
// best accuracies.
double pseudo_max_target(std::vector<double> best_accuracies, std::size_t quorum = 5);

}  // namespace rmpm::trainer
