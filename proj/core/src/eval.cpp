// SPDX-License-Identifier: Apache-2.0
#include "genb/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "genb/error.hpp"

namespace genb {
namespace {

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    RowVector e = (x.row(r).array() - m).exp().matrix();
    out.row(r) = e / e.sum();
  }
  return out;
}

Matrix instance_features(const VQAInstance& inst) { return inst.features.cast<double>(); }

}  // namespace

double vqa_accuracy(int predicted, const Eigen::VectorXd& y_gt) {
  if (y_gt.size() == 0) throw DomainError("vqa_accuracy: empty label vector");
  if (predicted < 0 || predicted >= y_gt.size()) throw DomainError("vqa_accuracy: predicted index out of range");
  return y_gt(predicted);
}

double vqa_accuracy(std::span<const int> predicted, const Matrix& y_gt) {
  if (predicted.empty()) throw DomainError("vqa_accuracy: empty predictions");
  if (static_cast<Eigen::Index>(predicted.size()) != y_gt.rows()) throw ContractError("vqa_accuracy: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    total += vqa_accuracy(predicted[i], y_gt.row(static_cast<Eigen::Index>(i)).transpose());
  }
  return total / static_cast<double>(predicted.size());
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index idx = 0;
    scores.row(r).maxCoeff(&idx);
    out[static_cast<std::size_t>(r)] = static_cast<int>(idx);
  }
  return out;
}

SplitMetrics evaluate_predictions(const SplitBundle& bundle, std::span<const int> predicted) {
  if (predicted.empty() || bundle.empty()) throw DomainError("evaluate_predictions: empty predictions");
  if (predicted.size() != bundle.size()) throw ContractError("evaluate_predictions: one prediction per instance required");
  const int nq = bundle.spec.num_qtypes;
  std::vector<double> sums(static_cast<std::size_t>(nq), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(nq), 0);
  double total = 0.0;
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    const VQAInstance& inst = bundle.instances[i];
    double s = vqa_accuracy(predicted[i], inst.answers.cast<double>());
    total += s;
    sums[static_cast<std::size_t>(inst.qtype)] += s;
    ++counts[static_cast<std::size_t>(inst.qtype)];
  }
  SplitMetrics m;
  m.split = bundle.split;
  m.count = static_cast<int>(bundle.size());
  m.accuracy = total / static_cast<double>(bundle.size());
  for (int t = 0; t < nq; ++t) {
    QtypeAccuracy q;
    q.qtype = t;
    q.count = counts[static_cast<std::size_t>(t)];
    q.accuracy = q.count > 0 ? sums[static_cast<std::size_t>(t)] / q.count : 0.0;
    m.per_qtype.push_back(q);
  }
  return m;
}

SplitMetrics evaluate_predictor(const Predictor& predict, const SplitBundle& bundle, int chunk) {
  if (bundle.empty()) throw DomainError("evaluate_predictor: empty bundle");
  std::vector<int> all;
  all.reserve(bundle.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < bundle.size(); start += static_cast<std::size_t>(chunk)) {
    std::size_t stop = std::min(bundle.size(), start + static_cast<std::size_t>(chunk));
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    std::vector<int> part = predict(make_batch(bundle, idx));
    if (part.size() != idx.size()) throw ContractError("predictor returned the wrong number of answers");
    all.insert(all.end(), part.begin(), part.end());
  }
  return evaluate_predictions(bundle, all);
}

SplitMetrics evaluate_model(const TargetModel& target, const SplitBundle& bundle) {
  if (target.config.visual_dim != bundle.spec.visual_dim || target.config.objects != bundle.spec.objects_per_image ||
      target.config.num_answers != bundle.spec.num_answers || target.config.question_len != bundle.spec.question_len) {
    throw ContractError("evaluate_model: model and dataset dimensions disagree");
  }
  return evaluate_predictor(
      [&](const Batch& b) { return argmax_rows(predict(target, b.features, b.tokens).logits); }, bundle);
}

double total_variation(const RowVector& p, const RowVector& q) {
  if (p.size() != q.size()) throw ContractError("total_variation: size mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

NoiseLogitFn noise_logits(const BiasModel& bias, const Generator& gen) {
  return [&bias, &gen](const Matrix& noise, std::span<const int> tokens) {
    return bias_forward_noise(bias, gen, noise, tokens).logits;
  };
}

PriorDivergence bias_prior_divergence(const NoiseLogitFn& bias, const SplitBundle& bundle, int num_noise_samples,
                                      Rng& rng, int noise_dim) {
  const PriorTable prior = prior_table(bundle);
  const int nq = bundle.spec.num_qtypes;
  const int na = bundle.spec.num_answers;
  const int n = bundle.spec.objects_per_image;
  const int len = bundle.spec.question_len;

  std::vector<std::vector<std::size_t>> by_qtype(static_cast<std::size_t>(nq));
  for (std::size_t i = 0; i < bundle.size(); ++i) by_qtype[static_cast<std::size_t>(bundle.instances[i].qtype)].push_back(i);

  PriorDivergence out;
  out.mean_prediction = Matrix::Constant(nq, na, std::numeric_limits<double>::quiet_NaN());
  out.tv.assign(static_cast<std::size_t>(nq), std::numeric_limits<double>::quiet_NaN());
  out.kl.assign(static_cast<std::size_t>(nq), std::numeric_limits<double>::quiet_NaN());
  double tv_sum = 0.0;
  int defined = 0;
  constexpr int kChunk = 500;
  for (int t = 0; t < nq; ++t) {
    const auto& members = by_qtype[static_cast<std::size_t>(t)];
    if (!prior.defined[static_cast<std::size_t>(t)] || members.empty()) continue;
    RowVector acc = RowVector::Zero(na);
    for (int start = 0; start < num_noise_samples; start += kChunk) {
      const int rows = std::min(kChunk, num_noise_samples - start);
      std::vector<int> tokens(static_cast<std::size_t>(rows * len));
      for (int r = 0; r < rows; ++r) {
        const auto& q = bundle.instances[members[static_cast<std::size_t>(start + r) % members.size()]].question;
        std::copy(q.begin(), q.end(), tokens.begin() + r * len);
      }
      Matrix z = sample_noise(rng, rows * n, noise_dim);
      acc += softmax_rows(bias(z, tokens)).colwise().sum();
    }
    RowVector mean = acc / static_cast<double>(num_noise_samples);
    out.mean_prediction.row(t) = mean;
    const RowVector p = prior.probs.row(t);
    double tv = total_variation(mean, p);
    double kl = 0.0;
    for (int a = 0; a < na; ++a) {
      if (p(a) > 0.0) kl += p(a) * (std::log(p(a)) - std::log(std::max(mean(a), 1e-300)));
    }
    out.tv[static_cast<std::size_t>(t)] = tv;
    out.kl[static_cast<std::size_t>(t)] = kl;
    tv_sum += tv;
    ++defined;
  }
  out.mean_tv = defined > 0 ? tv_sum / defined : std::numeric_limits<double>::quiet_NaN();
  return out;
}

PriorDivergence bias_prior_divergence(const BiasModel& bias, const Generator& gen, const SplitBundle& bundle,
                                      int num_noise_samples, Rng& rng) {
  return bias_prior_divergence(noise_logits(bias, gen), bundle, num_noise_samples, rng, gen.config.noise_dim);
}

AttentionStudy attention_noise_study(const BiasModel& bias, const Generator& gen, const VQAInstance& instance,
                                     std::span<const Matrix> noises) {
  AttentionStudy study;
  int id = 0;
  for (const Matrix& z : noises) {
    Prediction p = bias_forward_noise(bias, gen, z, instance.question);
    study.draws.push_back({id++, p.attention.row(0), argmax_rows(p.logits).front()});
  }
  Prediction real = bias_forward_real(bias, instance_features(instance), instance.question);
  study.draws.push_back({-1, real.attention.row(0), argmax_rows(real.logits).front()});

  const std::size_t k = noises.size();
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      total += (study.draws[i].attention - study.draws[j].attention).cwiseAbs().sum();
      ++pairs;
    }
  }
  study.dispersion = pairs > 0 ? total / pairs : 0.0;
  return study;
}

AttentionStudy attention_noise_study(const BiasModel& bias, const Generator& gen, const VQAInstance& instance,
                                     int k_draws, Rng& rng) {
  if (k_draws < 2) throw ContractError("attention_noise_study: k_draws must be at least 2");
  std::vector<Matrix> noises;
  for (int i = 0; i < k_draws; ++i) noises.push_back(sample_noise(rng, bias.config.objects, gen.config.noise_dim));
  return attention_noise_study(bias, gen, instance, noises);
}

double bias_accuracy_noise(const BiasModel& bias, const Generator& gen, const SplitBundle& bundle, Rng& rng) {
  return evaluate_predictor(
             [&](const Batch& b) {
               Matrix z = sample_noise(rng, b.batch_size * b.objects, gen.config.noise_dim);
               return argmax_rows(bias_forward_noise(bias, gen, z, b.tokens).logits);
             },
             bundle)
      .accuracy;
}

double bias_accuracy_real(const BiasModel& bias, const SplitBundle& bundle) {
  return evaluate_predictor([&](const Batch& b) { return argmax_rows(bias_forward_real(bias, b.features, b.tokens).logits); },
                            bundle)
      .accuracy;
}

}  // namespace genb
