#pragma once

// Experiment configuration shared by every subcommand. Stored as one JSON
// object; unknown keys are rejected, missing keys keep their preset value.

#include "ctflow/corpus.hpp"
#include "ctflow/features.hpp"
#include "ctflow/field_model.hpp"
#include "ctflow/sampler.hpp"
#include "ctflow/trainer.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace ctflow::tools {

/// Malformed or inconsistent configuration (exit code 2).
class ConfigError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

struct ModelSettings {
  Eigen::Index width = 128;
  Eigen::Index depth = 2;
  Eigen::Index embed_dim = 32;
};

struct ExperimentConfig {
  std::string preset = "toy";
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::CTFSE;
  CorpusSpec corpus;
  FeatureConfig features;
  ModelSettings model;
  TrainConfig trainer = TrainConfig::toy();
  int steps = 5;  // Euler steps N for enhance

  FieldModelConfig field_config() const {
    return {features.dim(), model.width, model.depth, model.embed_dim};
  }
  /// Trainer settings with the top-level seed and the scheme's loss weights
  /// (FlowSE trains L1 only).
  TrainConfig train_config() const;
  SamplerConfig sampler_config() const;

  void validate() const;

  static ExperimentConfig toy();
  static ExperimentConfig paper();
  static ExperimentConfig preset_named(std::string_view name);
};

std::string to_json_text(const ExperimentConfig& cfg);

/// Overlays the JSON text on `base`. Throws ConfigError naming the offending key.
ExperimentConfig apply_json_text(const ExperimentConfig& base, const std::string& text);

/// Resolution order: explicit path, then $CTFLOW_CONFIG, then the preset alone.
/// A file may name its own "preset", which becomes the base it overlays.
ExperimentConfig load_experiment(const std::filesystem::path& path, std::string_view preset);

inline constexpr const char* kConfigEnvVar = "CTFLOW_CONFIG";

}  // namespace ctflow::tools
