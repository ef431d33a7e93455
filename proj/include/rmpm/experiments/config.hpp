#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rmpm/svcca/svcca.hpp"
#include "rmpm/trainer/synthetic.hpp"
#include "rmpm/trainer/train.hpp"

namespace rmpm::experiments {

// Minimal TOML subset: [section] / [section.sub] headers, key = value with
// numbers, "strings", true/false and flat [arrays]; '#' comments.
struct ConfigValue {
  std::variant<double, std::string, bool, std::vector<ConfigValue>> v;
  std::size_t line = 0;
};
using ConfigTable = std::map<std::string, std::map<std::string, ConfigValue>>;

ConfigTable parse_config_text(std::string_view text);

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "idx"
  trainer::SyntheticSpec synthetic{4, 2000, 16, 0.3};
  std::size_t test_samples = 500;
  std::uint64_t seed = 0;
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::optional<std::size_t> classes;
  std::size_t train_limit = 0;  // 0 keeps every sample
  std::size_t test_limit = 0;
};

struct AnalysisConfig {
  svcca::SvccaConfig svcca;
  std::size_t subset_size = 0;  // 0 = min(1000, N / 4)
  std::size_t confab_top_n = 16;
  std::string hyp1_tap = "fc1";
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string network = "desk";  // "desk", "large" or a layer string
  trainer::TrainingStrategy base;
  std::vector<double> values;    // swept regime values
  std::vector<trainer::TrainingStrategy> explicit_strategies;  // [strategy.X] sections
  std::vector<std::string> ood{"xflip", "pixelate", "jitter"};
  DataConfig data;
  AnalysisConfig analysis;
  std::size_t jobs = 1;

  // Regime values expanded into named strategies, or the explicit ones.
  std::vector<trainer::TrainingStrategy> strategies() const;
  void validate() const;
};

ExperimentConfig config_from_table(const ConfigTable& t);
ExperimentConfig load_config(const std::filesystem::path& path);

// "desk": 3 learning rates x 3 seeds on synthetic data.
// "paper": the 7-value grid x 10 seeds with the large network.
// `regime` selects the learning-rate or batch-size grid.
ExperimentConfig preset(std::string_view name, trainer::Regime regime = trainer::Regime::learning_rate);

// Name used for a strategy directory, e.g. "lr_0.0003" or "bs_64".
std::string strategy_name(trainer::Regime regime, double value);

}  // namespace rmpm::experiments
