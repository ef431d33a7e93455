#include "rmpm/trainer/train.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>

#include "rmpm/error.hpp"
#include "rmpm/rng.hpp"

namespace rmpm::trainer {
namespace {

std::string accuracy_text(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", a);
  return buf;
}

}  // namespace

std::string to_string(Regime r) {
  return r == Regime::learning_rate ? "learning_rate" : "batch_size";
}

Regime parse_regime(std::string_view s) {
  if (s == "learning_rate" || s == "lr") return Regime::learning_rate;
  if (s == "batch_size" || s == "bs") return Regime::batch_size;
  fail(Errc::config, "unknown regime '" + std::string(s) + "'");
}

std::string to_string(StopMode m) { return m == StopMode::risk_band ? "risk_band" : "pseudo_max"; }

StopMode parse_stop_mode(std::string_view s) {
  if (s == "risk_band") return StopMode::risk_band;
  if (s == "pseudo_max") return StopMode::pseudo_max;
  fail(Errc::config, "unknown stopping mode '" + std::string(s) + "'");
}

double TrainingStrategy::regime_value() const {
  return regime == Regime::learning_rate ? learning_rate : static_cast<double>(batch_size);
}

void TrainingStrategy::validate() const {
  require(learning_rate > 0.0, Errc::config, "learning_rate must be positive");
  require(batch_size >= 1, Errc::config, "batch_size must be at least 1");
  require(max_epochs >= 1, Errc::config, "max_epochs must be at least 1");
  require(!seeds.empty(), Errc::config, "strategy has no seeds");
  std::set<std::uint64_t> seen;
  for (auto s : seeds) {
    if (!seen.insert(s).second) fail(Errc::config, "duplicate seed " + std::to_string(s));
  }
  require(band.epsilon > 0.0, Errc::config, "risk band epsilon must be positive");
}

bool is_eval_step(const TrainingStrategy& s, std::size_t step) {
  if (step == 0) return false;
  if (s.batch_size >= 256 && step % 200 == 0) return true;
  return s.eval_every_steps > 0 && step % s.eval_every_steps == 0;
}

VariantResult train_with_rule(const TrainingStrategy& strategy, std::uint64_t seed,
                              const NetworkSpec& spec, const Dataset& train, const Dataset& test,
                              const StopRule& rule) {
  strategy.validate();
  require(train.size() > 0, Errc::empty_input, "empty training set");
  require(test.size() > 0, Errc::empty_input, "empty test set");
  if ((rule.kind == StopRule::Kind::band && rule.target - rule.epsilon >= 1.0) ||
      (rule.kind == StopRule::Kind::at_least && rule.target > 1.0)) {
    fail(Errc::target_unreachable, "target " + accuracy_text(rule.target) + " exceeds accuracy 1");
  }

  VariantResult r;
  r.seed = seed;
  r.model = init_network(spec, seed);
  AdamState adam;
  Rng rng(derive_seed(seed, "shuffle"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::optional<VariantResult> best;
  std::size_t step = 0;
  double best_acc = -1.0;

  // Returns true when training should stop with the current model.
  auto evaluate = [&](std::size_t epoch) {
    const double acc = evaluate_accuracy(r.model, test);
    best_acc = std::max(best_acc, acc);
    switch (rule.kind) {
      case StopRule::Kind::band:
        if (std::abs(acc - rule.target) < rule.epsilon) {
          r.accuracy = acc;
          r.epochs = epoch;
          r.steps = step;
          return true;
        }
        return false;
      case StopRule::Kind::at_least:
        if (acc >= rule.target) {
          r.accuracy = acc;
          r.epochs = epoch;
          r.steps = step;
          return true;
        }
        return false;
      case StopRule::Kind::best:
        if (!best || acc > best->accuracy) {
          best = VariantResult{seed, r.model, acc, acc, epoch, step};
        }
        return false;
    }
    return false;
  };

  for (std::size_t epoch = 1; epoch <= strategy.max_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += strategy.batch_size) {
      const std::size_t end = std::min(order.size(), start + strategy.batch_size);
      train_step(r.model, train, std::span<const std::size_t>(order.data() + start, end - start),
                 adam, strategy.learning_rate);
      ++step;
      if (end < order.size() && is_eval_step(strategy, step) && evaluate(epoch)) {
        r.best_accuracy = best_acc;
        return r;
      }
    }
    if (evaluate(epoch)) {
      r.best_accuracy = best_acc;
      return r;
    }
  }

  if (best) {
    best->best_accuracy = best_acc;
    return *best;
  }
  fail(Errc::target_unreachable, "seed " + std::to_string(seed) + " never reached target " +
                                     accuracy_text(rule.target) + "; best accuracy " +
                                     accuracy_text(best_acc));
}

VariantResult train_variant(const TrainingStrategy& strategy, std::uint64_t seed,
                            const NetworkSpec& spec, const Dataset& train, const Dataset& test) {
  StopRule rule;
  if (strategy.stopping == StopMode::risk_band) {
    rule = {StopRule::Kind::band, strategy.band.target_accuracy, strategy.band.epsilon};
  } else {
    rule.kind = StopRule::Kind::best;
  }
  return train_with_rule(strategy, seed, spec, train, test, rule);
}

double pseudo_max_target(std::vector<double> best_accuracies, std::size_t quorum) {
  require(!best_accuracies.empty(), Errc::empty_input, "no accuracies for pseudo-max");
  require(quorum >= 1, Errc::invalid_argument, "quorum must be at least 1");
  std::sort(best_accuracies.begin(), best_accuracies.end(), std::greater<>());
  const std::size_t q = std::min(quorum, best_accuracies.size());
  return best_accuracies[q - 1];
}

}  // namespace rmpm::trainer
