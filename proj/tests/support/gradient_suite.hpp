// SPDX-License-Identifier: Apache-2.0
// Finite-difference checks over every loss and every network, shared by the
// unit tests and the acceptance runner.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "genb/losses.hpp"
#include "genb/models.hpp"
#include "oracles.hpp"

namespace genb::oracle {

struct SuiteEntry {
  std::string name;
  int instances = 0;
  GradCheck check;
};

inline Matrix uniform_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * rng.uniform();
  return m;
}

inline std::vector<SuiteEntry> loss_gradient_suite(int instances, double rtol, std::uint64_t seed = 11) {
  Rng rng(seed);
  std::vector<SuiteEntry> out;
  auto entry = [&](const std::string& name) -> GradCheck& {
    out.push_back({name, instances, {}});
    return out.back().check;
  };

  GradCheck& bce = entry("bce_from_logits");
  GradCheck& dis = entry("gan_discriminator_loss");
  GradCheck& gen_mm = entry("gan_generator_loss/minimax");
  GradCheck& gen_ns = entry("gan_generator_loss/non_saturating");
  GradCheck& kl_sm = entry("distill_kl/softmax");
  GradCheck& kl_be = entry("distill_kl/bernoulli");
  GradCheck& tl_genb = entry("target_loss/genb");
  GradCheck& tl_sup = entry("target_loss/suppressed");
  GradCheck& tl_plain = entry("target_loss/plain");
  GradCheck& total = entry("genb_total");

  for (int k = 0; k < instances; ++k) {
    const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng.below(4));
    const Eigen::Index cols = 2 + static_cast<Eigen::Index>(rng.below(6));
    Matrix logits = uniform_matrix(rng, rows, cols, -4.0, 4.0);
    Matrix targets = uniform_matrix(rng, rows, cols, 0.0, 1.0);
    Matrix other = uniform_matrix(rng, rows, cols, -4.0, 4.0);

    LossGrad lg = bce_from_logits(logits, targets);
    compare_gradients(bce, "bce", lg.grad,
                      numeric_gradient([&](const Matrix& x) { return bce_from_logits(x, targets).value; }, logits), rtol);

    Matrix d_real = uniform_matrix(rng, rows, 1, 0.05, 0.95);
    Matrix d_fake = uniform_matrix(rng, rows, 1, 0.05, 0.95);
    DiscriminatorLoss dl = gan_discriminator_loss(d_real, d_fake);
    compare_gradients(dis, "d_real", dl.grad_real,
                      numeric_gradient([&](const Matrix& x) { return gan_discriminator_loss(x, d_fake).value; }, d_real),
                      rtol);
    compare_gradients(dis, "d_fake", dl.grad_fake,
                      numeric_gradient([&](const Matrix& x) { return gan_discriminator_loss(d_real, x).value; }, d_fake),
                      rtol);

    for (auto [mode, check] : {std::pair{GeneratorLossMode::kMinimax, &gen_mm},
                               std::pair{GeneratorLossMode::kNonSaturating, &gen_ns}}) {
      LossGrad g = gan_generator_loss(d_fake, mode);
      compare_gradients(*check, "d_fake", g.grad,
                        numeric_gradient([&, m = mode](const Matrix& x) { return gan_generator_loss(x, m).value; }, d_fake),
                        rtol);
    }

    for (auto [mode, check] : {std::pair{KlMode::kSoftmax, &kl_sm}, std::pair{KlMode::kBernoulli, &kl_be}}) {
      LossGrad g = distill_kl(logits, other, mode);
      compare_gradients(*check, "bias_logits", g.grad,
                        numeric_gradient([&, m = mode](const Matrix& x) { return distill_kl(logits, x, m).value; }, other),
                        rtol);
    }

    for (auto [variant, check] : {std::pair{DebiasVariant::kGenB, &tl_genb}, std::pair{DebiasVariant::kSuppressed, &tl_sup},
                                  std::pair{DebiasVariant::kPlain, &tl_plain}}) {
      LossGrad g = target_loss(logits, targets, other, variant);
      compare_gradients(
          *check, "target_logits", g.grad,
          numeric_gradient([&, v = variant](const Matrix& x) { return target_loss(x, targets, other, v).value; }, logits),
          rtol);
    }

    // genb_total is linear in its components: gradient = weights.
    LossWeights w;
    w.distill = 2.0 * rng.uniform();
    w.gt = 2.0 * rng.uniform();
    w.use_gan = rng.bernoulli(0.5);
    Matrix comps = uniform_matrix(rng, 1, 3, -1.0, 1.0);
    auto as_total = [&](const Matrix& c) { return genb_total({c(0, 0), c(0, 1), c(0, 2)}, w); };
    Matrix expected(1, 3);
    expected << (w.use_gan ? 1.0 : 0.0), w.distill, w.gt;
    compare_gradients(total, "components", expected, numeric_gradient(as_total, comps), rtol);
  }
  return out;
}

/// Analytic parameter and input gradients of sum(probe .* output) against
/// central differences, for the target/bias architecture, generator and
/// discriminator.
inline std::vector<SuiteEntry> network_gradient_suite(int instances, double rtol, std::uint64_t seed = 21) {
  std::vector<SuiteEntry> out{{"target model", instances, {}},
                              {"bias model on generated features", instances, {}},
                              {"generator", instances, {}},
                              {"discriminator", instances, {}},
                              {"generator with batch statistics", instances, {}}};
  Rng rng(seed);
  for (int k = 0; k < instances; ++k) {
    const ModelConfig cfg = small_model(seed * 1000 + static_cast<std::uint64_t>(k));
    const int batch = 2;
    const int n = cfg.objects;
    ModelBundle mb = ModelBundle::initialize(cfg);
    mb.generator.running_mean = rng.normal_matrix(1, cfg.visual_dim);
    mb.generator.running_var = uniform_matrix(rng, 1, cfg.visual_dim, 0.5, 2.0);
    Matrix features = rng.normal_matrix(batch * n, cfg.visual_dim);
    Matrix noise = rng.normal_matrix(batch * n, cfg.noise_dim);
    std::vector<int> tokens = random_tokens(rng, batch, cfg);
    Matrix probe_logits = rng.normal_matrix(batch, cfg.num_answers);
    Matrix probe_features = rng.normal_matrix(batch * n, cfg.visual_dim);
    Matrix probe_score = rng.normal_matrix(batch, 1);
    Matrix answer_in = rng.normal_matrix(batch, cfg.num_answers);

    // Target model: parameters and image features.
    {
      GradCheck& c = out[0].check;
      ad::Tape tape;
      ad::Var v = tape.input(features);
      VqaOutput o = vqa_forward(tape, mb.target, v, tokens);
      tape.backward(ad::weighted_sum(o.logits, probe_logits));
      auto value_at = [&](const Matrix& feats) {
        ad::Tape t(ad::Tape::kNoGrad);
        return (vqa_forward(t, mb.target, t.constant(feats), tokens).logits.value().cwiseProduct(probe_logits)).sum();
      };
      compare_gradients(c, "features", tape.grad(v), numeric_gradient(value_at, features), rtol);
      mb.target.for_each_param([&](const char* name, Matrix& p) {
        Matrix analytic = tape.grad_of(p);
        Matrix saved = p;
        Matrix numeric = numeric_gradient(
            [&](const Matrix& x) {
              p = x;
              return value_at(features);
            },
            saved);
        p = saved;
        compare_gradients(c, name, analytic, numeric, rtol);
      });
    }

    // Bias model fed by the generator: parameters of both.
    {
      GradCheck& cb = out[1].check;
      GradCheck& cg = out[2].check;
      ad::Tape tape;
      ad::Var gen = generator_forward(tape, mb.generator, tape.constant(noise));
      VqaOutput o = vqa_forward(tape, mb.bias, gen, tokens);
      tape.backward(ad::weighted_sum(o.logits, probe_logits));
      auto value_at = [&] { return bias_forward_noise(mb.bias, mb.generator, noise, tokens).logits.cwiseProduct(probe_logits).sum(); };
      auto check_net = [&](auto& net, GradCheck& c) {
        net.for_each_param([&](const char* name, Matrix& p) {
          Matrix analytic = tape.grad_of(p);
          Matrix saved = p;
          Matrix numeric = numeric_gradient(
              [&](const Matrix& x) {
                p = x;
                return value_at();
              },
              saved);
          p = saved;
          compare_gradients(c, name, analytic, numeric, rtol);
        });
      };
      check_net(mb.bias, cb);
      check_net(mb.generator, cg);

      // Generator alone w.r.t. its input noise.
      ad::Tape t2;
      ad::Var z = t2.input(noise);
      t2.backward(ad::weighted_sum(generator_forward(t2, mb.generator, z), probe_features));
      auto gen_at = [&](const Matrix& x) {
        ad::Tape t(ad::Tape::kNoGrad);
        return generator_forward(t, mb.generator, t.constant(x)).value().cwiseProduct(probe_features).sum();
      };
      compare_gradients(cg, "noise", t2.grad(z), numeric_gradient(gen_at, noise), rtol);
    }

    // Generator in training mode: statistics taken over the rows of the batch.
    {
      GradCheck& c = out[4].check;
      ad::Tape tape;
      ad::Var z = tape.input(noise);
      tape.backward(ad::weighted_sum(generator_forward(tape, mb.generator, z, NormStats::kBatch), probe_features));
      auto value_at = [&](const Matrix& x) {
        ad::Tape t(ad::Tape::kNoGrad);
        return generator_forward(t, mb.generator, t.constant(x), NormStats::kBatch).value().cwiseProduct(probe_features).sum();
      };
      compare_gradients(c, "noise", tape.grad(z), numeric_gradient(value_at, noise), rtol);
      mb.generator.for_each_param([&](const char* name, Matrix& p) {
        Matrix analytic = tape.grad_of(p);
        Matrix saved = p;
        Matrix numeric = numeric_gradient(
            [&](const Matrix& x) {
              p = x;
              return value_at(noise);
            },
            saved);
        p = saved;
        compare_gradients(c, name, analytic, numeric, rtol);
      });
    }

    // Discriminator: parameters and answer-logit input.
    {
      GradCheck& c = out[3].check;
      ad::Tape tape;
      ad::Var y = tape.input(answer_in);
      tape.backward(ad::weighted_sum(discriminator_forward(tape, mb.discriminator, y), probe_score));
      auto value_at = [&](const Matrix& x) {
        ad::Tape t(ad::Tape::kNoGrad);
        return discriminator_forward(t, mb.discriminator, t.constant(x)).value().cwiseProduct(probe_score).sum();
      };
      compare_gradients(c, "answer_logits", tape.grad(y), numeric_gradient(value_at, answer_in), rtol);
      mb.discriminator.for_each_param([&](const char* name, Matrix& p) {
        Matrix analytic = tape.grad_of(p);
        Matrix saved = p;
        Matrix numeric = numeric_gradient(
            [&](const Matrix& x) {
              p = x;
              return value_at(answer_in);
            },
            saved);
        p = saved;
        compare_gradients(c, name, analytic, numeric, rtol);
      });
    }
  }
  return out;
}

}  // namespace genb::oracle
