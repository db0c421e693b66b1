// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "genb/archive.hpp"
#include "genb/error.hpp"
#include "genb/models.hpp"
#include "gradient_suite.hpp"
#include "oracles.hpp"

using namespace genb;

namespace {

struct Inputs {
  Matrix features;
  std::vector<int> tokens;
};

Inputs random_inputs(const ModelConfig& c, int batch, std::uint64_t seed) {
  Rng rng(seed);
  return {rng.normal_matrix(batch * c.objects, c.visual_dim), oracle::random_tokens(rng, batch, c)};
}

ModelConfig default_model(std::uint64_t seed = 1) {
  ModelConfig c;
  c.init_seed = seed;
  return c;
}

}  // namespace

TEST_CASE("noise sampling") {
  Rng a(12), b(12);
  Matrix za = sample_noise(a, 4, 128);
  CHECK(za.rows() == 4);
  CHECK(za.cols() == 128);
  CHECK(za == sample_noise(b, 4, 128));

  Rng big(1);
  Matrix z = sample_noise(big, 1000, 100);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().mean();
  CHECK((mean >= -0.02 && mean <= 0.02));
  CHECK((var >= 0.97 && var <= 1.03));
}

TEST_CASE("forward shapes and attention simplex") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ModelConfig c = default_model(seed);
    TargetModel f = init_target(c);
    Inputs in = random_inputs(c, 5, seed);
    Prediction p = target_forward(f, in.features, in.tokens);
    CHECK(p.logits.rows() == 5);
    CHECK(p.logits.cols() == c.num_answers);
    CHECK(p.attention.rows() == 5);
    CHECK(p.attention.cols() == c.objects);
    CHECK((p.attention.array() >= 0.0).all());
    for (Eigen::Index r = 0; r < 5; ++r) CHECK(std::abs(p.attention.row(r).sum() - 1.0) <= 1e-6);
  }
}

TEST_CASE("object permutation permutes attention and leaves logits unchanged") {
  ModelConfig c = default_model(4);
  TargetModel f = init_target(c);
  Inputs in = random_inputs(c, 1, 9);
  std::vector<int> perm{2, 0, 3, 1};
  Matrix permuted(in.features.rows(), in.features.cols());
  for (int j = 0; j < 4; ++j) permuted.row(j) = in.features.row(perm[static_cast<std::size_t>(j)]);
  Prediction a = target_forward(f, in.features, in.tokens);
  Prediction b = target_forward(f, permuted, in.tokens);
  CHECK((a.logits - b.logits).cwiseAbs().maxCoeff() <= 1e-12);
  for (int j = 0; j < 4; ++j) CHECK(b.attention(0, j) == doctest::Approx(a.attention(0, perm[static_cast<std::size_t>(j)])).epsilon(1e-12));
}

TEST_CASE("zeroed final classifier layer outputs its bias") {
  ModelConfig c = default_model(5);
  TargetModel f = init_target(c);
  f.cls_out.setZero();
  Inputs in = random_inputs(c, 3, 2);
  Prediction p = target_forward(f, in.features, in.tokens);
  for (Eigen::Index r = 0; r < 3; ++r) CHECK(p.logits.row(r) == f.cls_out_bias.row(0));
}

TEST_CASE("target and bias share architecture but not storage") {
  ModelBundle m = ModelBundle::initialize(default_model(6));
  CHECK(shape_signature(m.target) == shape_signature(m.bias));
  std::vector<const double*> target_ptrs;
  m.target.for_each_param([&](const char*, const Matrix& p) { target_ptrs.push_back(p.data()); });
  m.bias.for_each_param([&](const char*, const Matrix& p) {
    CHECK(std::find(target_ptrs.begin(), target_ptrs.end(), p.data()) == target_ptrs.end());
  });
  // Independent initialization streams.
  CHECK_FALSE(m.target.cls_out == m.bias.cls_out);
}

TEST_CASE("bias forward on noise is the composition G then F_b") {
  ModelConfig c = default_model(7);
  ModelBundle m = ModelBundle::initialize(c);
  Rng rng(3);
  Matrix z = sample_noise(rng, 2 * c.objects, c.noise_dim);
  Matrix z2 = sample_noise(rng, 2 * c.objects, c.noise_dim);
  Inputs in = random_inputs(c, 2, 4);

  Prediction once = bias_forward_noise(m.bias, m.generator, z, in.tokens);
  CHECK(once.logits == bias_forward_noise(m.bias, m.generator, z, in.tokens).logits);
  CHECK_FALSE(once.logits == bias_forward_noise(m.bias, m.generator, z2, in.tokens).logits);

  ad::Tape tape(ad::Tape::kNoGrad);
  Matrix generated = generator_forward(tape, m.generator, tape.constant(z)).value();
  CHECK(generated.rows() == z.rows());
  CHECK(generated.cols() == c.visual_dim);
  CHECK(predict(m.bias, generated, in.tokens).logits == once.logits);
  CHECK(bias_forward_real(m.bias, generated, in.tokens).logits == once.logits);
}

TEST_CASE("generated object rows have unit length when configured") {
  ModelConfig c = default_model(8);
  Rng rng(1);
  Matrix z = sample_noise(rng, 12, c.noise_dim);
  Generator g = init_generator(c);
  ad::Tape tape(ad::Tape::kNoGrad);
  Matrix out = generator_forward(tape, g, tape.constant(z)).value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) CHECK(out.row(r).norm() == doctest::Approx(1.0).epsilon(1e-9));

  c.unit_rows = false;
  Generator raw = init_generator(c);
  ad::Tape t2(ad::Tape::kNoGrad);
  Matrix unnormalized = generator_forward(t2, raw, t2.constant(z)).value();
  CHECK(std::abs(unnormalized.row(0).norm() - 1.0) > 1e-6);
}

TEST_CASE("generator standardizes its output features") {
  ModelConfig c = default_model(9);
  c.unit_rows = false;
  Generator g = init_generator(c);
  Rng rng(2);
  Matrix z = sample_noise(rng, 64, c.noise_dim);
  ad::Tape tape(ad::Tape::kNoGrad);
  Matrix batch = generator_forward(tape, g, tape.constant(z), NormStats::kBatch).value();
  for (Eigen::Index j = 0; j < batch.cols(); ++j) {
    CHECK(std::abs(batch.col(j).mean()) < 1e-12);
    CHECK((batch.col(j).array() - batch.col(j).mean()).square().mean() == doctest::Approx(1.0).epsilon(1e-3));
  }

  // Fresh running statistics (mean 0, variance 1) leave the raw output unchanged up to eps.
  ModelConfig raw_cfg = c;
  raw_cfg.batch_norm = false;
  Generator raw = init_generator(raw_cfg);
  Matrix unnormalized = generator_forward(tape, raw, tape.constant(z)).value();
  Matrix running = generator_forward(tape, g, tape.constant(z)).value();
  CHECK((running - unnormalized / std::sqrt(1.0 + 1e-5)).cwiseAbs().maxCoeff() < 1e-12);

  // Repeated updates on one batch converge to its mean and unbiased variance.
  for (int k = 0; k < 400; ++k) update_running_stats(g, z);
  Eigen::RowVectorXd mean = unnormalized.colwise().mean();
  Eigen::RowVectorXd var = (unnormalized.rowwise() - mean).array().square().colwise().sum() / 63.0;
  CHECK((g.running_mean - mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((g.running_var - var).cwiseAbs().maxCoeff() < 1e-9);
  Matrix settled = generator_forward(tape, g, tape.constant(z)).value();
  CHECK((settled.colwise().mean()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(update_running_stats(g, z.topRows(1)), ContractError);
}

TEST_CASE("untrained bias model reacts to the image") {
  ModelConfig c = default_model(9);
  BiasModel b = init_bias(c);
  Inputs one = random_inputs(c, 1, 1);
  Inputs two = random_inputs(c, 1, 2);
  CHECK_FALSE(bias_forward_real(b, one.features, one.tokens).logits ==
              bias_forward_real(b, two.features, one.tokens).logits);
}

TEST_CASE("discriminator output range and identity case") {
  ModelConfig c = default_model(10);
  Discriminator d = init_discriminator(c);
  Rng rng(2);
  for (int k = 0; k < 100; ++k) {
    RowVector y = rng.normal_matrix(1, c.num_answers) * (k % 10 == 0 ? 1e4 : 3.0);
    double s = discriminator_forward(d, y);
    CHECK((s > 0.0 && s < 1.0));
  }
  d.w3.setZero();
  const double expected = oracle::logistic(d.b3(0, 0));
  CHECK(discriminator_forward(d, RowVector::Zero(c.num_answers)) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(discriminator_forward(d, RowVector::Constant(c.num_answers, 5.0)) == doctest::Approx(expected).epsilon(1e-15));
  RowVector bad = RowVector::Zero(c.num_answers);
  bad(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(discriminator_forward(d, bad), NumericError);
}

TEST_CASE("forwards are pure") {
  ModelBundle m = ModelBundle::initialize(default_model(11));
  auto before = oracle::snapshot(m);
  Inputs in = random_inputs(m.config, 3, 5);
  Matrix features_copy = in.features;
  target_forward(m.target, in.features, in.tokens);
  bias_forward_real(m.bias, in.features, in.tokens);
  Rng rng(1);
  bias_forward_noise(m.bias, m.generator, sample_noise(rng, 12, m.config.noise_dim), in.tokens);
  discriminator_forward(m.discriminator, RowVector::Ones(m.config.num_answers));
  CHECK(oracle::bit_identical(before, oracle::snapshot(m)));
  CHECK(features_copy == in.features);
}

TEST_CASE("shape mismatches are contract errors") {
  ModelConfig c = default_model(12);
  TargetModel f = init_target(c);
  Inputs in = random_inputs(c, 2, 1);
  CHECK_THROWS_AS(target_forward(f, Matrix::Zero(8, c.visual_dim + 1), in.tokens), ContractError);
  CHECK_THROWS_AS(target_forward(f, Matrix::Zero(7, c.visual_dim), in.tokens), ContractError);
  std::vector<int> short_tokens(in.tokens.begin(), in.tokens.end() - 1);
  CHECK_THROWS_AS(target_forward(f, in.features, short_tokens), ContractError);
  std::vector<int> bad_token = in.tokens;
  bad_token[0] = c.vocab_size;
  CHECK_THROWS_AS(target_forward(f, in.features, bad_token), ContractError);
  Generator g = init_generator(c);
  CHECK_THROWS_AS(bias_forward_noise(init_bias(c), g, Matrix::Zero(8, c.noise_dim - 1), in.tokens), ContractError);
}

TEST_CASE("checkpoint round trip with dotted keys") {
  ModelBundle m = ModelBundle::initialize(default_model(13));
  Rng rng(8);
  update_running_stats(m.generator, sample_noise(rng, 32, m.config.noise_dim));
  auto path = std::filesystem::temp_directory_path() / "genb_models_roundtrip.ckpt";
  save_models(m, path);
  Archive ar = Archive::load(path);
  CHECK(ar.meta("format") == kCheckpointFormat);
  CHECK(ar.contains("target.attn.W_v"));
  CHECK(ar.contains("bias.cls.b2"));
  CHECK(ar.contains("generator.W1"));
  CHECK(ar.contains("discriminator.W3"));
  ModelBundle back = load_models(path);
  CHECK(back.config == m.config);
  CHECK(oracle::bit_identical(oracle::snapshot(back), oracle::snapshot(m)));
  CHECK(back.generator.running_mean == m.generator.running_mean);
  CHECK(back.generator.running_var == m.generator.running_var);
}

TEST_CASE("analytic network gradients match central differences") {
  for (const auto& e : oracle::network_gradient_suite(20, 1e-4)) {
    INFO(e.name << ": " << e.check.where);
    CHECK(e.check.ok);
  }
}
