// SPDX-License-Identifier: Apache-2.0
//
// Training objectives. Every batched loss returns its value together with
// the gradient w.r.t. the trainable argument so it can be spliced into a
// tape via ad::custom_scalar. Batched losses average over rows.
#pragma once

#include <string>

#include "genb/autodiff.hpp"

namespace genb {

/// Log clamp used by the adversarial losses.
inline constexpr double kLogClampEps = 1e-7;

double sigmoid(double x);

struct LossWeights {
  double distill = 1.0;  // lambda_1
  double gt = 1.0;       // lambda_2
  bool use_gan = true;
  bool use_distill = true;
  bool use_gt = true;

  void validate() const;
};

enum class KlMode { kSoftmax, kBernoulli };
enum class GeneratorLossMode { kMinimax, kNonSaturating };
/// Target-model debiasing loss: "genb" (clipped pseudo-label on raw bias
/// logits), "suppressed" (pseudo-label on sigmoid bias scores), "plain" (BCE
/// on the ground truth).
enum class DebiasVariant { kGenB, kSuppressed, kPlain };

std::string to_string(KlMode m);
std::string to_string(GeneratorLossMode m);
std::string to_string(DebiasVariant v);
KlMode parse_kl_mode(const std::string& s);
GeneratorLossMode parse_generator_loss(const std::string& s);
DebiasVariant parse_debias_variant(const std::string& s);

struct LossGrad {
  double value = 0.0;
  Matrix grad;  // d value / d (first argument)
};

/// Mean over answers of the stable logit-space binary cross entropy,
/// averaged over rows. Gradient w.r.t. logits. Throws DomainError for targets
/// outside [0,1] and NumericError for non-finite logits.
LossGrad bce_from_logits(const Matrix& logits, const Matrix& targets);

struct DiscriminatorLoss {
  double value = 0.0;
  Matrix grad_real;
  Matrix grad_fake;
};
/// -[log D(y) + log(1 - D(y_b))], scores clamped to [eps, 1-eps].
double gan_discriminator_loss(double d_real, double d_fake);
DiscriminatorLoss gan_discriminator_loss(const Matrix& d_real, const Matrix& d_fake);

/// Minimax: log(1 - D(y_b)). Non-saturating: -log D(y_b).
double gan_generator_loss(double d_fake, GeneratorLossMode mode = GeneratorLossMode::kMinimax);
LossGrad gan_generator_loss(const Matrix& d_fake, GeneratorLossMode mode = GeneratorLossMode::kMinimax);

/// KL(P || Q) with P from the (detached) target logits and Q from the bias
/// logits. Gradient w.r.t. the bias logits.
double distill_kl(const RowVector& target_logits, const RowVector& bias_logits, KlMode mode = KlMode::kSoftmax);
LossGrad distill_kl(const Matrix& target_logits, const Matrix& bias_logits, KlMode mode = KlMode::kSoftmax);

struct GenBComponents {
  double gan = 0.0;
  double distill = 0.0;
  double gt = 0.0;
};
/// L_GAN + lambda_1 L_distill + lambda_2 L_GT with ablation switches.
double genb_total(const GenBComponents& c, const LossWeights& w);

/// y_DL = min(1, 2 y_gt sigmoid(-2 y_gt y_b)) elementwise; y_b are raw logits.
Matrix pseudo_label(const Matrix& y_gt, const Matrix& y_b);
/// Same formula with y_b replaced by sigmoid(y_b).
Matrix pseudo_label_suppressed(const Matrix& y_gt, const Matrix& y_b);

/// BCE of the target logits against the variant's label. Gradient w.r.t.
/// the target logits only.
LossGrad target_loss(const Matrix& target_logits, const Matrix& y_gt, const Matrix& y_b, DebiasVariant variant);

}  // namespace genb
