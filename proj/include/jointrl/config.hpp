#pragma once

#include "jointrl/evolve.hpp"
#include "jointrl/trainer.hpp"

namespace jointrl::cli {

// Config file problems carry the offending key so the CLI can name the field.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ExperimentConfig {
  std::string name = "experiment";
  train::TrainConfig train;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir;

  void validate() const;
};

struct SearchExperimentConfig {
  std::string name = "search";
  train::TrainConfig base;       // per-particle runs start from this
  evolve::SearchConfig search;
  std::string output_dir;
};

// Flat key-value text with dotted sections ("sac.discount = 0.99"); '#' starts
// a comment. Unknown keys are errors naming the key.
ExperimentConfig parse_experiment_config(const std::string& text);
SearchExperimentConfig parse_search_config(const std::string& text);

ExperimentConfig load_experiment_config(const std::string& path);
SearchExperimentConfig load_search_config(const std::string& path);

// Emits a complete experiment config; parse_experiment_config round-trips it.
std::string experiment_config_text(const ExperimentConfig& cfg);

// The searched combo folded into a runnable experiment config.
ExperimentConfig apply_combo(const ExperimentConfig& base, const ssl::LossCombo& combo);

}  // namespace jointrl::cli
