// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "genb/error.hpp"
#include "genb/eval.hpp"
#include "genb/trainer.hpp"
#include "oracles.hpp"

using namespace genb;

namespace {

struct Splits {
  SplitBundle train = generate_split(DatasetSpec{}, Split::kTrain);
  SplitBundle test = generate_split(DatasetSpec{}, Split::kTest);
};

const Splits& defaults() {
  static const Splits s;
  return s;
}

std::vector<int> signature_predictions(const SplitBundle& b) {
  Eigen::MatrixXd table = answer_embeddings(b.spec);
  std::vector<int> out;
  for (const auto& inst : b.instances) {
    Eigen::RowVectorXd row = inst.features.row(inst.signature_index).cast<double>();
    Eigen::Index best = 0;
    (table.rowwise() - row).rowwise().squaredNorm().minCoeff(&best);
    out.push_back(static_cast<int>(best));
  }
  return out;
}

/// Logits whose softmax is exactly `probs` for the qtype token of each question.
NoiseLogitFn lookup_model(const Matrix& probs, int question_len) {
  return [probs, question_len](const Matrix& noise, std::span<const int> tokens) {
    const auto questions = static_cast<Eigen::Index>(tokens.size()) / question_len;
    (void)noise;
    Matrix logits(questions, probs.cols());
    for (Eigen::Index b = 0; b < questions; ++b) {
      logits.row(b) = probs.row(tokens[static_cast<std::size_t>(b * question_len)]).array().log();
    }
    return logits;
  };
}

}  // namespace

TEST_CASE("vqa accuracy of a single prediction") {
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(10);
  onehot(3) = 1.0;
  CHECK(vqa_accuracy(3, onehot) == 1.0);
  CHECK(vqa_accuracy(4, onehot) == 0.0);
  Eigen::VectorXd soft = Eigen::VectorXd::Zero(10);
  soft(2) = 2.0 / 3.0;
  soft(5) = 1.0 / 3.0;
  CHECK(vqa_accuracy(2, soft) == doctest::Approx(0.667).epsilon(1e-3));
  CHECK_THROWS_AS(vqa_accuracy(0, Eigen::VectorXd()), DomainError);
  CHECK_THROWS_AS(vqa_accuracy(10, onehot), DomainError);
}

TEST_CASE("one-hot accuracy is exact match") {
  const SplitBundle& b = defaults().test;
  Rng rng(5);
  std::vector<int> pred;
  int hits = 0;
  for (const auto& inst : b.instances) {
    pred.push_back(static_cast<int>(rng.below(10)));
    hits += pred.back() == inst.answer();
  }
  SplitMetrics m = evaluate_predictions(b, pred);
  CHECK(m.accuracy == static_cast<double>(hits) / static_cast<double>(b.size()));
  CHECK_THROWS_AS(vqa_accuracy(std::span<const int>(), Matrix(0, 10)), DomainError);
}

TEST_CASE("signature oracle separates both splits") {
  for (const SplitBundle* b : {&defaults().train, &defaults().test}) {
    CHECK(evaluate_predictions(*b, signature_predictions(*b)).accuracy >= 0.98);
  }
}

TEST_CASE("majority answer per question type scores the skew") {
  PriorTable prior = prior_table(defaults().train);
  Predictor majority = [&](const Batch& batch) {
    std::vector<int> out;
    for (int t : batch.qtypes) {
      Eigen::Index best = 0;
      prior.probs.row(t).maxCoeff(&best);
      out.push_back(static_cast<int>(best));
    }
    return out;
  };
  CHECK(evaluate_predictor(majority, defaults().train).accuracy == doctest::Approx(0.9).epsilon(0.02 / 0.9));
  CHECK(evaluate_predictor(majority, defaults().test).accuracy == doctest::Approx(0.1).epsilon(0.03 / 0.1));
}

TEST_CASE("untrained target model is at chance") {
  TrainConfig cfg;
  double sum = 0.0;
  const int inits = 8;
  for (int s = 0; s < inits; ++s) {
    cfg.seed = static_cast<std::uint64_t>(s);
    TargetModel t = init_target(model_config_for(defaults().test.spec, cfg));
    sum += evaluate_model(t, defaults().test).accuracy;
  }
  CHECK(std::abs(sum / inits - 0.1) <= 0.05);
}

TEST_CASE("overall accuracy is the count-weighted mean over question types") {
  TrainConfig cfg;
  TargetModel t = init_target(model_config_for(defaults().train.spec, cfg));
  for (const SplitBundle* b : {&defaults().train, &defaults().test}) {
    SplitMetrics m = evaluate_model(t, *b);
    double weighted = 0.0;
    int total = 0;
    for (const auto& q : m.per_qtype) {
      weighted += q.accuracy * q.count;
      total += q.count;
    }
    CHECK(total == m.count);
    CHECK(std::abs(weighted / total - m.accuracy) <= 1e-9);
    CHECK(m.per_qtype.size() == 5);
  }
}

TEST_CASE("evaluation is a pure function of parameters and data") {
  TrainConfig cfg;
  cfg.seed = 3;
  TargetModel t = init_target(model_config_for(defaults().test.spec, cfg));
  SplitMetrics a = evaluate_model(t, defaults().test);
  SplitMetrics b = evaluate_model(t, defaults().test);
  CHECK(a.accuracy == b.accuracy);
  std::vector<int> p1 = argmax_rows(predict(t, make_full_batch(defaults().test).features, make_full_batch(defaults().test).tokens).logits);
  CHECK(evaluate_predictions(defaults().test, p1).accuracy == a.accuracy);
}

TEST_CASE("prior divergence") {
  const SplitBundle& b = defaults().train;
  PriorTable prior = prior_table(b);
  const int L = b.spec.question_len;

  SUBCASE("exact prior lookup has zero divergence") {
    Rng rng(1);
    PriorDivergence d = bias_prior_divergence(lookup_model(prior.probs, L), b, 200, rng, 8);
    for (double tv : d.tv) CHECK(tv <= 1e-12);
    CHECK(d.mean_tv <= 1e-12);
  }

  SUBCASE("uniform output against the skewed prior") {
    Rng rng(2);
    Matrix uniform = Matrix::Constant(5, 10, 0.1);
    PriorDivergence d = bias_prior_divergence(lookup_model(uniform, L), b, 200, rng, 8);
    for (int t = 0; t < 5; ++t) {
      std::vector<double> p(10), u(10, 0.1);
      for (int a = 0; a < 10; ++a) p[static_cast<std::size_t>(a)] = prior.probs(t, a);
      CHECK(d.tv[static_cast<std::size_t>(t)] == doctest::Approx(oracle::half_l1(p, u)).epsilon(1e-12));
      CHECK(d.tv[static_cast<std::size_t>(t)] == doctest::Approx(0.8).epsilon(0.03));
    }
  }

  SUBCASE("range and draw order") {
    TrainConfig cfg;
    ModelConfig mc = model_config_for(b.spec, cfg);
    BiasModel bias = init_bias(mc);
    Generator gen = init_generator(mc);
    Rng r1(10), r2(20);
    PriorDivergence a = bias_prior_divergence(bias, gen, b, 1000, r1);
    PriorDivergence c = bias_prior_divergence(bias, gen, b, 1000, r2);
    for (std::size_t t = 0; t < a.tv.size(); ++t) {
      CHECK((a.tv[t] >= 0.0 && a.tv[t] <= 1.0));
      CHECK(std::abs(a.tv[t] - c.tv[t]) <= 0.01);
    }
  }
}

TEST_CASE("total variation helper") {
  RowVector p(4), q(4);
  p << 0.5, 0.5, 0.0, 0.0;
  q << 0.0, 0.0, 0.5, 0.5;
  CHECK(total_variation(p, q) == 1.0);
  CHECK(total_variation(p, p) == 0.0);
}

TEST_CASE("attention noise study") {
  TrainConfig cfg;
  ModelConfig mc = model_config_for(defaults().test.spec, cfg);
  BiasModel bias = init_bias(mc);
  Generator gen = init_generator(mc);
  const VQAInstance& inst = defaults().test.instances[0];

  Rng rng(4);
  Matrix z = sample_noise(rng, mc.objects, mc.noise_dim);
  std::vector<Matrix> same{z, z};
  AttentionStudy dup = attention_noise_study(bias, gen, inst, same);
  CHECK(dup.dispersion == 0.0);
  CHECK(dup.draws.size() == 3);

  AttentionStudy s = attention_noise_study(bias, gen, inst, 8, rng);
  CHECK(s.dispersion > 0.0);
  REQUIRE(s.draws.size() == 9);
  for (int k = 0; k < 8; ++k) CHECK(s.draws[static_cast<std::size_t>(k)].draw_id == k);
  CHECK(s.draws.back().draw_id == -1);
  for (const auto& d : s.draws) CHECK(d.attention.sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(attention_noise_study(bias, gen, inst, 1, rng), ContractError);
}
