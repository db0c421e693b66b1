// SPDX-License-Identifier: Apache-2.0
//
// Alternating optimization. Per batch, in this order:
//   (a) d_steps_per_batch discriminator updates, then one bias+generator
//       update on the weighted GenB objective (fresh noise for each);
//   (b) one target update on the debiasing loss, with the bias model run on
//       the real image features.
// Each model only ever receives gradients from its own objective.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "genb/biasworld.hpp"
#include "genb/config.hpp"
#include "genb/error.hpp"
#include "genb/models.hpp"
#include "genb/optim.hpp"
#include "genb/random.hpp"
#include "genb/report.hpp"

namespace genb {

/// One CSV row of losses.csv. Components that a variant does not compute are 0.
struct LossRecord {
  long long step = 0;
  int epoch = 0;
  double l_gt = 0.0;
  double l_gan_d = 0.0;
  double l_gan_g = 0.0;
  double l_distill = 0.0;
  double l_target = 0.0;

  bool finite() const;
};

inline constexpr const char* kLossCsvHeader = "step,epoch,l_gt,l_gan_d,l_gan_g,l_distill,l_target";
std::string to_csv_row(const LossRecord& r);

/// Raised when a loss becomes non-finite; carries the offending record.
class NonFiniteLoss : public NumericError {
 public:
  explicit NonFiniteLoss(LossRecord record);
  const LossRecord& record() const noexcept { return record_; }

 private:
  LossRecord record_;
};

/// Model dimensions implied by a dataset plus the configured widths.
ModelConfig model_config_for(const DatasetSpec& data, const TrainConfig& cfg);

struct TrainState {
  ModelBundle models;
  Optimizer opt_target;
  Optimizer opt_bias;
  Optimizer opt_generator;
  Optimizer opt_discriminator;
  int epoch = 0;
  long long step = 0;
  Rng data_rng;
  Rng noise_rng;
  std::vector<HistoryEntry> history;

  static TrainState initialize(const ModelConfig& model, const TrainConfig& cfg);

  /// Checkpoint with parameters, optimizer moments, counters and random
  /// stream states; resumes bit-exactly.
  void save(const std::filesystem::path& path) const;
  static TrainState load(const std::filesystem::path& path, const TrainConfig& cfg);
};

/// (a): discriminator step(s) then bias+generator step. For the vanilla bias
/// variant, a plain BCE step of the bias model on the real features instead.
/// The target model is never modified.
LossRecord train_step_bias(TrainState& state, const TrainConfig& cfg, const Batch& batch);

/// (b): target step. `bias_logits_override`, when given, replaces the bias
/// model's output (test hook). Bias, generator and discriminator are never
/// modified.
LossRecord train_step_target(TrainState& state, const TrainConfig& cfg, const Batch& batch,
                             const Matrix* bias_logits_override = nullptr);

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;      // checkpoints land here
  std::optional<std::filesystem::path> resume_from;  // checkpoint to resume
  std::function<void(const LossRecord&)> on_step;
  std::function<void(const HistoryEntry&)> on_eval;
  /// Stop after this many epochs of the current invocation (resume testing).
  std::optional<int> stop_after_epochs;
};

struct TrainResult {
  ModelBundle models;
  RunReport report;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<AttentionStudy> attention;  // one per studied test instance
  std::vector<std::size_t> attention_instances;
  bool nan_abort = false;
  std::string abort_message;
};

TrainResult train(const TrainConfig& cfg, const SplitBundle& train_split, const SplitBundle& test_split,
                  const TrainOptions& options = {});

/// "instance_id,draw_id,alpha_0..alpha_{n-1},top_answer" rows.
std::string attention_csv(const TrainResult& result);

}  // namespace genb
