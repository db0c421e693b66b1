// SPDX-License-Identifier: Apache-2.0
//
// Evaluation quantities. Only the target model is used for accuracy; the
// bias model is inspected through diagnostics (prior divergence, noise
// resampling of its attention).
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "genb/biasworld.hpp"
#include "genb/models.hpp"
#include "genb/random.hpp"

namespace genb {

/// y_gt[predicted]: exact match for one-hot labels, the soft consensus score
/// otherwise. Throws DomainError for an empty label vector or an index out
/// of range.
double vqa_accuracy(int predicted, const Eigen::VectorXd& y_gt);
/// Mean score over rows of `y_gt`. Throws DomainError when empty.
double vqa_accuracy(std::span<const int> predicted, const Matrix& y_gt);

/// Row-wise argmax.
std::vector<int> argmax_rows(const Matrix& scores);

struct QtypeAccuracy {
  int qtype = 0;
  int count = 0;
  double accuracy = 0.0;  // 0 when count == 0
};

struct SplitMetrics {
  Split split = Split::kTrain;
  int count = 0;
  double accuracy = 0.0;
  std::vector<QtypeAccuracy> per_qtype;
};

/// Maps a batch to one predicted answer per instance.
using Predictor = std::function<std::vector<int>(const Batch&)>;

SplitMetrics evaluate_predictions(const SplitBundle& bundle, std::span<const int> predicted);
/// Streams the bundle through `predict` in fixed-size chunks, in order.
SplitMetrics evaluate_predictor(const Predictor& predict, const SplitBundle& bundle, int chunk = 2048);
/// Accuracy of the target model (argmax of its logits).
SplitMetrics evaluate_model(const TargetModel& target, const SplitBundle& bundle);

/// Half the L1 distance between two categorical distributions.
double total_variation(const RowVector& p, const RowVector& q);

/// Bias logits for a stack of questions given noise [B*n, d_z] and tokens [B*L].
using NoiseLogitFn = std::function<Matrix(const Matrix& noise, std::span<const int> tokens)>;
NoiseLogitFn noise_logits(const BiasModel& bias, const Generator& gen);

struct PriorDivergence {
  std::vector<double> tv;   // per qtype, NaN where the prior row is undefined
  std::vector<double> kl;   // KL(prior || mean prediction), reference only
  double mean_tv = 0.0;     // over defined qtypes
  Matrix mean_prediction;   // [T, |A|]
};

/// For each qtype, `num_noise_samples` fresh noise draws are paired with the
/// qtype's questions (cycled in dataset order); the mean softmax prediction
/// is compared with the bundle's prior row.
PriorDivergence bias_prior_divergence(const NoiseLogitFn& bias, const SplitBundle& bundle, int num_noise_samples,
                                      Rng& rng, int noise_dim);
PriorDivergence bias_prior_divergence(const BiasModel& bias, const Generator& gen, const SplitBundle& bundle,
                                      int num_noise_samples, Rng& rng);

struct AttentionDraw {
  int draw_id = 0;      // 0..k-1 for noise draws, -1 for the real-image pass
  RowVector attention;  // [n]
  int top_answer = 0;
};

struct AttentionStudy {
  std::vector<AttentionDraw> draws;  // k noise passes followed by one real pass
  double dispersion = 0.0;           // mean pairwise L1 between noise-draw attentions
};

AttentionStudy attention_noise_study(const BiasModel& bias, const Generator& gen, const VQAInstance& instance,
                                     int k_draws, Rng& rng);  // k_draws >= 2, else ContractError
/// Variant with caller-supplied noise matrices, each [n, d_z].
AttentionStudy attention_noise_study(const BiasModel& bias, const Generator& gen, const VQAInstance& instance,
                                     std::span<const Matrix> noises);

/// Accuracy of the bias model on a split, fed either one noise draw per
/// instance or the real image features.
double bias_accuracy_noise(const BiasModel& bias, const Generator& gen, const SplitBundle& bundle, Rng& rng);
double bias_accuracy_real(const BiasModel& bias, const SplitBundle& bundle);

}  // namespace genb
