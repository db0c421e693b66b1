// SPDX-License-Identifier: Apache-2.0
#include "genb/losses.hpp"

#include <algorithm>
#include <cmath>

#include "genb/error.hpp"

namespace genb {
namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double log_sigmoid(double x) { return -softplus(-x); }

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite values");
}

void check_unit_interval(const Matrix& m, const char* what) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v = m.data()[i];
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(what) + ": value outside [0,1]");
  }
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractError(std::string(what) + ": shape mismatch");
}

double clamp_score(double d) { return std::clamp(d, kLogClampEps, 1.0 - kLogClampEps); }
bool inside(double d) { return d > kLogClampEps && d < 1.0 - kLogClampEps; }

RowVector log_softmax(const RowVector& x) {
  double m = x.maxCoeff();
  double lse = m + std::log((x.array() - m).exp().sum());
  return (x.array() - lse).matrix();
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void LossWeights::validate() const {
  if (!std::isfinite(distill) || !std::isfinite(gt) || distill < 0.0 || gt < 0.0) {
    throw ConfigError("loss weights must be finite and nonnegative");
  }
}

std::string to_string(KlMode m) { return m == KlMode::kSoftmax ? "softmax" : "bernoulli"; }
std::string to_string(GeneratorLossMode m) { return m == GeneratorLossMode::kMinimax ? "minimax" : "non_saturating"; }
std::string to_string(DebiasVariant v) {
  switch (v) {
    case DebiasVariant::kGenB: return "genb";
    case DebiasVariant::kSuppressed: return "suppressed";
    case DebiasVariant::kPlain: return "plain";
  }
  return "?";
}

KlMode parse_kl_mode(const std::string& s) {
  if (s == "softmax") return KlMode::kSoftmax;
  if (s == "bernoulli") return KlMode::kBernoulli;
  throw ConfigError("unknown kl_mode '" + s + "' (expected softmax|bernoulli)");
}

GeneratorLossMode parse_generator_loss(const std::string& s) {
  if (s == "minimax") return GeneratorLossMode::kMinimax;
  if (s == "non_saturating") return GeneratorLossMode::kNonSaturating;
  throw ConfigError("unknown generator loss '" + s + "' (expected minimax|non_saturating)");
}

DebiasVariant parse_debias_variant(const std::string& s) {
  if (s == "genb") return DebiasVariant::kGenB;
  if (s == "suppressed") return DebiasVariant::kSuppressed;
  if (s == "plain") return DebiasVariant::kPlain;
  throw ConfigError("unknown debias loss variant '" + s + "' (expected genb|suppressed|plain)");
}

LossGrad bce_from_logits(const Matrix& logits, const Matrix& targets) {
  check_same_shape(logits, targets, "bce_from_logits");
  check_unit_interval(targets, "bce_from_logits targets");
  check_finite(logits, "bce_from_logits logits");
  const double denom = static_cast<double>(logits.size());
  LossGrad out;
  out.grad.resize(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double l = logits(r, c);
      const double t = targets(r, c);
      // -[t log s(l) + (1-t) log(1-s(l))] = max(l,0) - l t + log(1 + e^-|l|)
      total += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
      out.grad(r, c) = (sigmoid(l) - t) / denom;
    }
  }
  out.value = total / denom;
  return out;
}

double gan_discriminator_loss(double d_real, double d_fake) {
  return -(std::log(clamp_score(d_real)) + std::log(1.0 - clamp_score(d_fake)));
}

DiscriminatorLoss gan_discriminator_loss(const Matrix& d_real, const Matrix& d_fake) {
  check_same_shape(d_real, d_fake, "gan_discriminator_loss");
  const double n = static_cast<double>(d_real.size());
  DiscriminatorLoss out;
  out.grad_real.resize(d_real.rows(), d_real.cols());
  out.grad_fake.resize(d_fake.rows(), d_fake.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < d_real.size(); ++i) {
    const double r = d_real.data()[i];
    const double f = d_fake.data()[i];
    total += gan_discriminator_loss(r, f);
    out.grad_real.data()[i] = inside(r) ? -1.0 / (r * n) : 0.0;
    out.grad_fake.data()[i] = inside(f) ? 1.0 / ((1.0 - f) * n) : 0.0;
  }
  out.value = total / n;
  return out;
}

double gan_generator_loss(double d_fake, GeneratorLossMode mode) {
  const double d = clamp_score(d_fake);
  return mode == GeneratorLossMode::kMinimax ? std::log(1.0 - d) : -std::log(d);
}

LossGrad gan_generator_loss(const Matrix& d_fake, GeneratorLossMode mode) {
  const double n = static_cast<double>(d_fake.size());
  LossGrad out;
  out.grad.resize(d_fake.rows(), d_fake.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < d_fake.size(); ++i) {
    const double f = d_fake.data()[i];
    total += gan_generator_loss(f, mode);
    double g = 0.0;
    if (inside(f)) g = mode == GeneratorLossMode::kMinimax ? -1.0 / (1.0 - f) : -1.0 / f;
    out.grad.data()[i] = g / n;
  }
  out.value = total / n;
  return out;
}

double distill_kl(const RowVector& target_logits, const RowVector& bias_logits, KlMode mode) {
  return distill_kl(Matrix(target_logits), Matrix(bias_logits), mode).value;
}

LossGrad distill_kl(const Matrix& target_logits, const Matrix& bias_logits, KlMode mode) {
  check_same_shape(target_logits, bias_logits, "distill_kl");
  check_finite(target_logits, "distill_kl target logits");
  check_finite(bias_logits, "distill_kl bias logits");
  const Eigen::Index rows = target_logits.rows();
  const double n = static_cast<double>(rows);
  LossGrad out;
  out.grad.resize(rows, target_logits.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (mode == KlMode::kSoftmax) {
      RowVector log_p = log_softmax(target_logits.row(r));
      RowVector log_q = log_softmax(bias_logits.row(r));
      RowVector p = log_p.array().exp().matrix();
      total += (p.array() * (log_p - log_q).array()).sum();
      out.grad.row(r) = (log_q.array().exp().matrix() - p) / n;
    } else {
      for (Eigen::Index c = 0; c < target_logits.cols(); ++c) {
        const double t = target_logits(r, c);
        const double b = bias_logits(r, c);
        const double p = sigmoid(t);
        const double q = sigmoid(b);
        total += p * (log_sigmoid(t) - log_sigmoid(b)) + (1.0 - p) * (log_sigmoid(-t) - log_sigmoid(-b));
        out.grad(r, c) = (q - p) / n;
      }
    }
  }
  // Clamp tiny negative rounding so the value honours Gibbs' inequality.
  out.value = std::max(0.0, total / n);
  return out;
}

double genb_total(const GenBComponents& c, const LossWeights& w) {
  double total = 0.0;
  if (w.use_gan) total += c.gan;
  if (w.use_distill) total += w.distill * c.distill;
  if (w.use_gt) total += w.gt * c.gt;
  return total;
}

Matrix pseudo_label(const Matrix& y_gt, const Matrix& y_b) {
  check_same_shape(y_gt, y_b, "pseudo_label");
  check_unit_interval(y_gt, "pseudo_label y_gt");
  Matrix out(y_gt.rows(), y_gt.cols());
  for (Eigen::Index i = 0; i < y_gt.size(); ++i) {
    const double g = y_gt.data()[i];
    out.data()[i] = std::min(1.0, 2.0 * g * sigmoid(-2.0 * g * y_b.data()[i]));
  }
  return out;
}

Matrix pseudo_label_suppressed(const Matrix& y_gt, const Matrix& y_b) {
  check_same_shape(y_gt, y_b, "pseudo_label_suppressed");
  Matrix squashed = y_b.unaryExpr([](double x) { return sigmoid(x); });
  return pseudo_label(y_gt, squashed);
}

LossGrad target_loss(const Matrix& target_logits, const Matrix& y_gt, const Matrix& y_b, DebiasVariant variant) {
  switch (variant) {
    case DebiasVariant::kGenB: return bce_from_logits(target_logits, pseudo_label(y_gt, y_b));
    case DebiasVariant::kSuppressed: return bce_from_logits(target_logits, pseudo_label_suppressed(y_gt, y_b));
    case DebiasVariant::kPlain: return bce_from_logits(target_logits, y_gt);
  }
  throw ContractError("target_loss: unknown variant");
}

}  // namespace genb
