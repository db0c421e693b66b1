// SPDX-License-Identifier: Apache-2.0
//
// Flat key-value configuration files:
//
//   # comment
//   epochs = 6
//   debias_loss = genb
//
// Keys are the TrainConfig field names below; unknown keys are rejected.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "genb/losses.hpp"
#include "genb/optim.hpp"

namespace genb {

using KeyValues = std::map<std::string, std::string>;

/// Throws ConfigError with the line number on malformed lines or duplicates.
KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);

enum class BiasModelVariant { kGenB, kVanilla };
std::string to_string(BiasModelVariant v);
BiasModelVariant parse_bias_model_variant(const std::string& s);

struct TrainConfig {
  int epochs = 6;
  int batch_size = 64;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr_target = 1e-3;
  double lr_bias = 1e-3;           // bias model + generator
  double lr_discriminator = 1e-3;
  LossWeights weights;
  KlMode kl_mode = KlMode::kSoftmax;
  GeneratorLossMode generator_loss = GeneratorLossMode::kMinimax;
  DebiasVariant debias_loss = DebiasVariant::kGenB;
  BiasModelVariant bias_model = BiasModelVariant::kGenB;
  int d_steps_per_batch = 1;
  std::uint64_t seed = 0;
  bool deterministic = true;
  int checkpoint_every = 1;        // epochs; 0 disables periodic checkpoints
  int eval_every = 1;              // epochs; 0 evaluates only at the end

  // Network widths not implied by the data.
  int question_dim = 32;
  int hidden_dim = 64;
  int noise_dim = 128;
  int disc_hidden = 64;
  bool generator_batch_norm = true;
  bool generator_unit_rows = true;

  // Diagnostics.
  int prior_noise_draws = 1000;
  int attention_instances = 4;
  int attention_draws = 8;

  void validate() const;
  KeyValues to_kv() const;
  /// Starts from defaults and applies every key; unknown keys are errors.
  static TrainConfig from_kv(const KeyValues& kv);
  /// Applies `kv` on top of this config.
  TrainConfig with(const KeyValues& kv) const;
};

TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace genb
