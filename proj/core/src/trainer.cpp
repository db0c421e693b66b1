// SPDX-License-Identifier: Apache-2.0
#include "genb/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <Eigen/Core>

#include "genb/eval.hpp"
#include "genb/losses.hpp"

namespace genb {
namespace {

void require_finite(const LossRecord& r) {
  if (!r.finite()) throw NonFiniteLoss(r);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

void check_compatible(const SplitBundle& a, const SplitBundle& b) {
  const DatasetSpec& x = a.spec;
  const DatasetSpec& y = b.spec;
  if (x.num_answers != y.num_answers || x.num_qtypes != y.num_qtypes || x.objects_per_image != y.objects_per_image ||
      x.visual_dim != y.visual_dim || x.question_len != y.question_len || x.vocab_size != y.vocab_size) {
    throw ConfigError("train and test splits have different dimensions");
  }
}

}  // namespace

bool LossRecord::finite() const {
  return std::isfinite(l_gt) && std::isfinite(l_gan_d) && std::isfinite(l_gan_g) && std::isfinite(l_distill) &&
         std::isfinite(l_target);
}

std::string to_csv_row(const LossRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%d,%.9g,%.9g,%.9g,%.9g,%.9g", r.step, r.epoch, r.l_gt, r.l_gan_d, r.l_gan_g,
                r.l_distill, r.l_target);
  return buf;
}

NonFiniteLoss::NonFiniteLoss(LossRecord record)
    : NumericError("non-finite loss at step " + std::to_string(record.step) + " (" + to_csv_row(record) + ")"),
      record_(record) {}

ModelConfig model_config_for(const DatasetSpec& data, const TrainConfig& cfg) {
  ModelConfig m;
  m.visual_dim = data.visual_dim;
  m.objects = data.objects_per_image;
  m.num_answers = data.num_answers;
  m.question_len = data.question_len;
  m.vocab_size = data.vocab_size;
  m.question_dim = cfg.question_dim;
  m.hidden_dim = cfg.hidden_dim;
  m.noise_dim = cfg.noise_dim;
  m.disc_hidden = cfg.disc_hidden;
  m.batch_norm = cfg.generator_batch_norm;
  m.unit_rows = cfg.generator_unit_rows;
  m.init_seed = cfg.seed;
  return m;
}

TrainState TrainState::initialize(const ModelConfig& model, const TrainConfig& cfg) {
  TrainState s;
  s.models = ModelBundle::initialize(model);
  auto opt = [&](double lr) {
    OptimizerConfig oc;
    oc.kind = cfg.optimizer;
    oc.lr = lr;
    return Optimizer(oc);
  };
  s.opt_target = opt(cfg.lr_target);
  s.opt_bias = opt(cfg.lr_bias);
  s.opt_generator = opt(cfg.lr_bias);
  s.opt_discriminator = opt(cfg.lr_discriminator);
  s.data_rng = Rng::derive(cfg.seed, "train/data_order");
  s.noise_rng = Rng::derive(cfg.seed, "train/noise");
  return s;
}

void TrainState::save(const std::filesystem::path& path) const {
  Archive ar;
  write_models(ar, models);
  opt_target.save(ar, "target");
  opt_bias.save(ar, "bias");
  opt_generator.save(ar, "generator");
  opt_discriminator.save(ar, "discriminator");
  ar.set_meta("train.epoch", std::to_string(epoch));
  ar.set_meta("train.step", std::to_string(step));
  ar.set_meta("rng.data_order", data_rng.serialize());
  ar.set_meta("rng.noise", noise_rng.serialize());
  std::vector<double> hist;
  for (const auto& h : history) {
    hist.insert(hist.end(), {static_cast<double>(h.epoch), static_cast<double>(h.step), h.train_accuracy, h.test_accuracy});
  }
  ar.put("train.history", {static_cast<std::int64_t>(history.size()), 4}, std::span<const double>(hist));
  ar.save(path);
}

TrainState TrainState::load(const std::filesystem::path& path, const TrainConfig& cfg) {
  Archive ar = Archive::load(path);
  ModelBundle models = read_models(ar);
  TrainState s = initialize(models.config, cfg);
  s.models = std::move(models);
  s.opt_target.load(ar, "target");
  s.opt_bias.load(ar, "bias");
  s.opt_generator.load(ar, "generator");
  s.opt_discriminator.load(ar, "discriminator");
  s.epoch = std::stoi(ar.meta("train.epoch"));
  s.step = std::stoll(ar.meta("train.step"));
  s.data_rng = Rng::deserialize(ar.meta("rng.data_order"));
  s.noise_rng = Rng::deserialize(ar.meta("rng.noise"));
  const auto& arr = ar.array("train.history");
  if (arr.shape.size() != 2 || arr.shape[1] != 4) throw FormatError("train.history", "history must be [k, 4]");
  auto hist = ar.get_f64("train.history");
  for (std::int64_t i = 0; i < arr.shape[0]; ++i) {
    const double* row = hist.data() + i * 4;
    s.history.push_back({static_cast<int>(row[0]), static_cast<long long>(row[1]), row[2], row[3]});
  }
  return s;
}

LossRecord train_step_bias(TrainState& state, const TrainConfig& cfg, const Batch& batch) {
  ModelBundle& m = state.models;
  const int rows = batch.batch_size * batch.objects;
  LossRecord rec;
  rec.step = state.step;
  rec.epoch = state.epoch;

  if (cfg.bias_model == BiasModelVariant::kVanilla) {
    ad::Tape tape;
    VqaOutput out = vqa_forward(tape, m.bias, tape.constant(batch.features), batch.tokens);
    LossGrad gt = bce_from_logits(out.logits.value(), batch.targets);
    rec.l_gt = gt.value;
    require_finite(rec);
    tape.backward(ad::custom_scalar(out.logits, gt.value, std::move(gt.grad)));
    state.opt_bias.step(m.bias, "bias.", tape);
    return rec;
  }

  // Teacher answers from the target model; treated as constants throughout.
  const Matrix y_target = predict(m.target, batch.features, batch.tokens).logits;

  for (int d = 0; d < cfg.d_steps_per_batch; ++d) {
    Matrix z = sample_noise(state.noise_rng, rows, m.config.noise_dim);
    Matrix y_fake = bias_forward_noise(m.bias, m.generator, z, batch.tokens, NormStats::kBatch).logits;
    ad::Tape tape;
    ad::Var d_real = discriminator_forward(tape, m.discriminator, tape.constant(y_target));
    ad::Var d_fake = discriminator_forward(tape, m.discriminator, tape.constant(y_fake));
    DiscriminatorLoss dl = gan_discriminator_loss(d_real.value(), d_fake.value());
    rec.l_gan_d = dl.value;
    require_finite(rec);
    tape.backward(ad::add(ad::custom_scalar(d_real, dl.value, std::move(dl.grad_real)),
                          ad::custom_scalar(d_fake, 0.0, std::move(dl.grad_fake))));
    state.opt_discriminator.step(m.discriminator, "discriminator.", tape);
  }

  ad::Tape tape;
  Matrix z = sample_noise(state.noise_rng, rows, m.config.noise_dim);
  ad::Var generated = generator_forward(tape, m.generator, tape.constant(z), NormStats::kBatch);
  VqaOutput out = vqa_forward(tape, m.bias, generated, batch.tokens);
  const Matrix& y_bias = out.logits.value();

  ad::Var d_fake = discriminator_forward(tape, m.discriminator, out.logits);
  LossGrad gan = gan_generator_loss(d_fake.value(), cfg.generator_loss);
  LossGrad kl = distill_kl(y_target, y_bias, cfg.kl_mode);
  LossGrad gt = bce_from_logits(y_bias, batch.targets);
  rec.l_gan_g = gan.value;
  rec.l_distill = kl.value;
  rec.l_gt = gt.value;
  require_finite(rec);

  const LossWeights& w = cfg.weights;
  std::optional<ad::Var> total;
  auto accumulate = [&](ad::Var term) { total = total ? ad::add(*total, term) : term; };
  if (w.use_gan) accumulate(ad::custom_scalar(d_fake, gan.value, std::move(gan.grad)));
  if (w.use_distill) accumulate(ad::custom_scalar(out.logits, w.distill * kl.value, w.distill * kl.grad));
  if (w.use_gt) accumulate(ad::custom_scalar(out.logits, w.gt * gt.value, w.gt * gt.grad));
  if (!total) return rec;

  tape.backward(*total);
  // Gradients that reached D through d_fake are dropped.
  update_running_stats(m.generator, z);
  state.opt_bias.step(m.bias, "bias.", tape);
  state.opt_generator.step(m.generator, "generator.", tape);
  return rec;
}

LossRecord train_step_target(TrainState& state, const TrainConfig& cfg, const Batch& batch,
                             const Matrix* bias_logits_override) {
  ModelBundle& m = state.models;
  LossRecord rec;
  rec.step = state.step;
  rec.epoch = state.epoch;

  Matrix y_bias;
  if (bias_logits_override != nullptr) {
    y_bias = *bias_logits_override;
  } else if (cfg.debias_loss != DebiasVariant::kPlain) {
    y_bias = bias_forward_real(m.bias, batch.features, batch.tokens).logits;
  } else {
    y_bias = Matrix::Zero(batch.targets.rows(), batch.targets.cols());
  }

  ad::Tape tape;
  VqaOutput out = vqa_forward(tape, m.target, tape.constant(batch.features), batch.tokens);
  LossGrad loss = target_loss(out.logits.value(), batch.targets, y_bias, cfg.debias_loss);
  rec.l_target = loss.value;
  require_finite(rec);
  tape.backward(ad::custom_scalar(out.logits, loss.value, std::move(loss.grad)));
  state.opt_target.step(m.target, "target.", tape);
  return rec;
}

TrainResult train(const TrainConfig& cfg, const SplitBundle& train_split, const SplitBundle& test_split,
                  const TrainOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  if (train_split.empty() || test_split.empty()) throw ConfigError("train: both splits must be nonempty");
  check_compatible(train_split, test_split);
  if (cfg.deterministic) Eigen::setNbThreads(1);

  const ModelConfig model_cfg = model_config_for(train_split.spec, cfg);
  TrainState state = options.resume_from ? TrainState::load(*options.resume_from, cfg)
                                         : TrainState::initialize(model_cfg, cfg);
  if (!(state.models.config == model_cfg)) throw ConfigError("checkpoint model config does not match data/config");

  TrainResult result;
  RunReport& report = result.report;
  report.config = cfg.to_kv();
  report.dataset = train_split.spec.to_kv();
  report.seed = cfg.seed;
  report.split_stats = {split_statistics(train_split), split_statistics(test_split)};

  auto checkpoint = [&](const std::string& name) {
    if (!options.out_dir) return;
    std::filesystem::path p = *options.out_dir / name;
    state.save(p);
    result.checkpoints.push_back(p);
  };

  int epochs_run = 0;
  try {
    while (state.epoch < cfg.epochs) {
      if (options.stop_after_epochs && epochs_run >= *options.stop_after_epochs) break;
      const auto order = shuffled_indices(train_split.size(), state.data_rng);
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        const Batch batch = make_batch(train_split, std::span<const std::size_t>(order).subspan(start, stop - start));
        LossRecord rec = train_step_bias(state, cfg, batch);
        rec.l_target = train_step_target(state, cfg, batch).l_target;
        if (options.on_step) options.on_step(rec);
        ++state.step;
      }
      ++state.epoch;
      ++epochs_run;
      if (cfg.eval_every > 0 && state.epoch % cfg.eval_every == 0) {
        HistoryEntry h{state.epoch, state.step, evaluate_model(state.models.target, train_split).accuracy,
                       evaluate_model(state.models.target, test_split).accuracy};
        state.history.push_back(h);
        if (options.on_eval) options.on_eval(h);
      }
      if (cfg.checkpoint_every > 0 && (state.epoch % cfg.checkpoint_every == 0 || state.epoch == cfg.epochs)) {
        char name[64];
        std::snprintf(name, sizeof(name), "checkpoint_epoch%03d.ckpt", state.epoch);
        checkpoint(name);
        checkpoint("checkpoint_last.ckpt");
      }
    }
  } catch (const NumericError& e) {
    result.nan_abort = true;
    result.abort_message = "epoch " + std::to_string(state.epoch) + " step " + std::to_string(state.step) + ": " + e.what();
    report.status = "nan_abort";
  }

  report.history = state.history;
  if (!result.nan_abort && state.epoch > 0) {
    const ModelBundle& m = state.models;
    report.train = evaluate_model(m.target, train_split);
    report.test = evaluate_model(m.target, test_split);
    report.ood_gap = report.train->accuracy - report.test->accuracy;

    Rng diag = Rng::derive(cfg.seed, "diagnostics");
    BiasDiagnostics bias;
    PriorDivergence div = bias_prior_divergence(m.bias, m.generator, train_split, cfg.prior_noise_draws, diag);
    bias.prior_tv = div.tv;
    bias.prior_kl = div.kl;
    bias.mean_prior_tv = div.mean_tv;
    bias.test_accuracy_noise = bias_accuracy_noise(m.bias, m.generator, test_split, diag);
    bias.test_accuracy_real = bias_accuracy_real(m.bias, test_split);
    const std::size_t studied = std::min(test_split.size(), static_cast<std::size_t>(cfg.attention_instances));
    double dispersion = 0.0;
    for (std::size_t i = 0; i < studied; ++i) {
      result.attention.push_back(attention_noise_study(m.bias, m.generator, test_split.instances[i], cfg.attention_draws, diag));
      result.attention_instances.push_back(i);
      dispersion += result.attention.back().dispersion;
    }
    bias.attention_dispersion = studied > 0 ? dispersion / static_cast<double>(studied) : 0.0;
    report.bias = bias;
  }
  result.models = std::move(state.models);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::string attention_csv(const TrainResult& result) {
  std::string out = "instance_id,draw_id";
  const int n = result.models.config.objects;
  for (int j = 0; j < n; ++j) out += ",alpha_" + std::to_string(j);
  out += ",top_answer\n";
  char buf[64];
  for (std::size_t s = 0; s < result.attention.size(); ++s) {
    for (const auto& d : result.attention[s].draws) {
      out += std::to_string(result.attention_instances[s]) + "," + std::to_string(d.draw_id);
      for (Eigen::Index j = 0; j < d.attention.size(); ++j) {
        std::snprintf(buf, sizeof(buf), ",%.9g", d.attention(j));
        out += buf;
      }
      out += "," + std::to_string(d.top_answer) + "\n";
    }
  }
  return out;
}

}  // namespace genb
