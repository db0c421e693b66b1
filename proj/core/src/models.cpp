// SPDX-License-Identifier: Apache-2.0
#include "genb/models.hpp"

#include <cmath>
#include <cstdio>

#include "genb/error.hpp"

namespace genb {
namespace {

// Clamp keeping D's score strictly inside (0,1) after double rounding.
constexpr double kScoreFloor = 1e-12;

Matrix uniform_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double fan_in) {
  const double bound = 1.0 / std::sqrt(fan_in);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return m;
}

void init_vqa(VqaNet& net, const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const int dv = cfg.visual_dim, dq = cfg.question_dim, h = cfg.hidden_dim, na = cfg.num_answers;
  net.config = cfg;
  net.token_embedding = uniform_init(rng, cfg.vocab_size, dq, 1.0);
  for (auto* gate : {&net.gru_xz, &net.gru_hz, &net.gru_xr, &net.gru_hr, &net.gru_xn, &net.gru_hn}) {
    *gate = uniform_init(rng, dq, dq, dq);
  }
  for (auto* b : {&net.gru_bz, &net.gru_br, &net.gru_bn}) *b = uniform_init(rng, 1, dq, dq);
  net.attn_visual = uniform_init(rng, dv, h, dv + dq);
  net.attn_question = uniform_init(rng, dq, h, dv + dq);
  net.attn_bias = uniform_init(rng, 1, h, dv + dq);
  net.attn_score = uniform_init(rng, h, 1, h);
  net.fuse_visual = uniform_init(rng, dv, h, dv);
  net.fuse_visual_bias = uniform_init(rng, 1, h, dv);
  net.fuse_question = uniform_init(rng, dq, h, dq);
  net.fuse_question_bias = uniform_init(rng, 1, h, dq);
  net.cls_hidden = uniform_init(rng, h, h, h);
  net.cls_hidden_bias = uniform_init(rng, 1, h, h);
  net.cls_out = uniform_init(rng, h, na, h);
  net.cls_out_bias = uniform_init(rng, 1, na, h);
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void check_tokens(const VqaNet& net, std::span<const int> tokens, int batch) {
  const ModelConfig& cfg = net.config;
  if (static_cast<long>(tokens.size()) != static_cast<long>(batch) * cfg.question_len) {
    throw ContractError("question tokens: expected " + std::to_string(batch * cfg.question_len) + " ids, got " +
                        std::to_string(tokens.size()));
  }
  for (int tok : tokens) {
    if (tok < 0 || tok >= cfg.vocab_size) throw ContractError("question token id " + std::to_string(tok) + " out of vocabulary");
  }
}

}  // namespace

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("invalid model config: ") + msg);
  };
  require(visual_dim > 0, "visual_dim must be positive");
  require(question_dim > 0, "question_dim must be positive");
  require(objects > 0, "objects must be positive");
  require(num_answers > 0, "num_answers must be positive");
  require(question_len > 0, "question_len must be positive");
  require(vocab_size > 0, "vocab_size must be positive");
  require(hidden_dim > 0, "hidden_dim must be positive");
  require(noise_dim > 0, "noise_dim must be positive");
  require(disc_hidden > 0, "disc_hidden must be positive");
  require(leaky_slope >= 0.0 && leaky_slope < 1.0, "leaky_slope must lie in [0, 1)");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  return {
      {"visual_dim", std::to_string(visual_dim)},   {"question_dim", std::to_string(question_dim)},
      {"objects", std::to_string(objects)},         {"num_answers", std::to_string(num_answers)},
      {"question_len", std::to_string(question_len)}, {"vocab_size", std::to_string(vocab_size)},
      {"hidden_dim", std::to_string(hidden_dim)},   {"noise_dim", std::to_string(noise_dim)},
      {"disc_hidden", std::to_string(disc_hidden)}, {"leaky_slope", fmt_double(leaky_slope)},
      {"batch_norm", batch_norm ? "true" : "false"}, {"unit_rows", unit_rows ? "true" : "false"},
      {"init_seed", std::to_string(init_seed)},
  };
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(key, std::string("missing model config key '") + key + "'");
    return it->second;
  };
  try {
    c.visual_dim = std::stoi(get("visual_dim"));
    c.question_dim = std::stoi(get("question_dim"));
    c.objects = std::stoi(get("objects"));
    c.num_answers = std::stoi(get("num_answers"));
    c.question_len = std::stoi(get("question_len"));
    c.vocab_size = std::stoi(get("vocab_size"));
    c.hidden_dim = std::stoi(get("hidden_dim"));
    c.noise_dim = std::stoi(get("noise_dim"));
    c.disc_hidden = std::stoi(get("disc_hidden"));
    c.leaky_slope = std::stod(get("leaky_slope"));
    c.init_seed = std::stoull(get("init_seed"));
    c.batch_norm = get("batch_norm") == "true";
    c.unit_rows = get("unit_rows") == "true";
  } catch (const std::invalid_argument&) {
    throw FormatError("model", "non-numeric model config value");
  }
  return c;
}

TargetModel init_target(const ModelConfig& cfg) {
  Rng rng = Rng::derive(cfg.init_seed, "init/target");
  TargetModel m;
  init_vqa(m, cfg, rng);
  return m;
}

BiasModel init_bias(const ModelConfig& cfg) {
  Rng rng = Rng::derive(cfg.init_seed, "init/bias");
  BiasModel m;
  init_vqa(m, cfg, rng);
  return m;
}

Generator init_generator(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng = Rng::derive(cfg.init_seed, "init/generator");
  Generator g;
  g.config = cfg;
  g.w1 = uniform_init(rng, cfg.noise_dim, cfg.hidden_dim, cfg.noise_dim);
  g.b1 = uniform_init(rng, 1, cfg.hidden_dim, cfg.noise_dim);
  g.w2 = uniform_init(rng, cfg.hidden_dim, cfg.visual_dim, cfg.hidden_dim);
  g.b2 = uniform_init(rng, 1, cfg.visual_dim, cfg.hidden_dim);
  g.running_mean = Matrix::Zero(1, cfg.visual_dim);
  g.running_var = Matrix::Ones(1, cfg.visual_dim);
  return g;
}

Discriminator init_discriminator(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng = Rng::derive(cfg.init_seed, "init/discriminator");
  Discriminator d;
  d.config = cfg;
  d.w1 = uniform_init(rng, cfg.num_answers, cfg.disc_hidden, cfg.num_answers);
  d.b1 = uniform_init(rng, 1, cfg.disc_hidden, cfg.num_answers);
  d.w2 = uniform_init(rng, cfg.disc_hidden, cfg.disc_hidden, cfg.disc_hidden);
  d.b2 = uniform_init(rng, 1, cfg.disc_hidden, cfg.disc_hidden);
  d.w3 = uniform_init(rng, cfg.disc_hidden, 1, cfg.disc_hidden);
  d.b3 = uniform_init(rng, 1, 1, cfg.disc_hidden);
  return d;
}

ModelBundle ModelBundle::initialize(const ModelConfig& cfg) {
  ModelBundle b;
  b.config = cfg;
  b.target = init_target(cfg);
  b.bias = init_bias(cfg);
  b.generator = init_generator(cfg);
  b.discriminator = init_discriminator(cfg);
  return b;
}

ShapeSignature shape_signature(const VqaNet& net) {
  ShapeSignature sig;
  net.for_each_param([&](const char* name, const Matrix& m) { sig.emplace_back(name, m.rows(), m.cols()); });
  return sig;
}

Matrix sample_noise(Rng& rng, int rows, int noise_dim) { return rng.normal_matrix(rows, noise_dim); }

VqaOutput vqa_forward(ad::Tape& tape, const VqaNet& net, ad::Var features, std::span<const int> tokens) {
  const ModelConfig& cfg = net.config;
  const int n = cfg.objects;
  if (features.cols() != cfg.visual_dim || features.rows() % n != 0 || features.rows() == 0) {
    throw ContractError("vqa_forward: features must be [B*" + std::to_string(n) + ", " +
                        std::to_string(cfg.visual_dim) + "], got [" + std::to_string(features.rows()) + ", " +
                        std::to_string(features.cols()) + "]");
  }
  const int batch = static_cast<int>(features.rows() / n);
  check_tokens(net, tokens, batch);
  const int len = cfg.question_len;

  // Question encoder.
  ad::Var embedding = tape.param(net.token_embedding);
  ad::Var xz = tape.param(net.gru_xz), hz = tape.param(net.gru_hz), bz = tape.param(net.gru_bz);
  ad::Var xr = tape.param(net.gru_xr), hr = tape.param(net.gru_hr), br = tape.param(net.gru_br);
  ad::Var xn = tape.param(net.gru_xn), hn = tape.param(net.gru_hn), bn = tape.param(net.gru_bn);
  std::vector<int> step_tokens(static_cast<std::size_t>(batch));
  ad::Var hidden = tape.constant(Matrix::Zero(batch, cfg.question_dim));
  for (int t = 0; t < len; ++t) {
    for (int b = 0; b < batch; ++b) step_tokens[static_cast<std::size_t>(b)] = tokens[static_cast<std::size_t>(b * len + t)];
    ad::Var x = ad::gather_rows(embedding, step_tokens);
    ad::Var z = ad::sigmoid(ad::add_row(ad::add(ad::matmul(x, xz), ad::matmul(hidden, hz)), bz));
    ad::Var r = ad::sigmoid(ad::add_row(ad::add(ad::matmul(x, xr), ad::matmul(hidden, hr)), br));
    ad::Var cand = ad::tanh(ad::add_row(ad::add(ad::matmul(x, xn), ad::matmul(ad::mul(r, hidden), hn)), bn));
    hidden = ad::add(cand, ad::mul(z, ad::sub(hidden, cand)));
  }
  ad::Var q = hidden;  // [B, d_q]

  // Attention over objects.
  ad::Var joint = ad::add(ad::matmul(features, tape.param(net.attn_visual)),
                          ad::repeat_rows(ad::matmul(q, tape.param(net.attn_question)), n));
  joint = ad::relu(ad::add_row(joint, tape.param(net.attn_bias)));
  ad::Var scores = ad::fold_rows(ad::matmul(joint, tape.param(net.attn_score)), n);
  ad::Var alpha = ad::softmax_rows(scores);
  ad::Var pooled = ad::weighted_pool(alpha, features);

  // Fusion and classifier.
  ad::Var pv = ad::relu(ad::add_row(ad::matmul(pooled, tape.param(net.fuse_visual)), tape.param(net.fuse_visual_bias)));
  ad::Var pq = ad::relu(ad::add_row(ad::matmul(q, tape.param(net.fuse_question)), tape.param(net.fuse_question_bias)));
  ad::Var fused = ad::mul(pv, pq);
  ad::Var h1 = ad::relu(ad::add_row(ad::matmul(fused, tape.param(net.cls_hidden)), tape.param(net.cls_hidden_bias)));
  ad::Var logits = ad::add_row(ad::matmul(h1, tape.param(net.cls_out)), tape.param(net.cls_out_bias));
  return {logits, alpha};
}

namespace {

constexpr double kNormEps = 1e-5;

ad::Var generator_pre_norm(ad::Tape& tape, const Generator& gen, ad::Var noise) {
  if (noise.cols() != gen.config.noise_dim) {
    throw ContractError("generator_forward: noise must have " + std::to_string(gen.config.noise_dim) + " columns");
  }
  ad::Var h = ad::relu(ad::add_row(ad::matmul(noise, tape.param(gen.w1)), tape.param(gen.b1)));
  return ad::add_row(ad::matmul(h, tape.param(gen.w2)), tape.param(gen.b2));
}

}  // namespace

ad::Var generator_forward(ad::Tape& tape, const Generator& gen, ad::Var noise, NormStats stats) {
  ad::Var out = generator_pre_norm(tape, gen, noise);
  if (gen.config.batch_norm) {
    if (stats == NormStats::kBatch) {
      out = ad::standardize_cols(out, kNormEps);
    } else {
      RowVector inv_sd = (gen.running_var.array() + kNormEps).sqrt().inverse();
      Matrix scale = inv_sd.replicate(out.rows(), 1);
      out = ad::mul(ad::add_row(out, tape.constant(-gen.running_mean)), tape.constant(std::move(scale)));
    }
  }
  return gen.config.unit_rows ? ad::normalize_rows(out) : out;
}

void update_running_stats(Generator& gen, const Matrix& noise, double momentum) {
  if (!gen.config.batch_norm) return;
  ad::Tape tape(ad::Tape::kNoGrad);
  const Matrix x = generator_pre_norm(tape, gen, tape.constant(noise)).value();
  if (x.rows() < 2) throw ContractError("update_running_stats: need at least two rows");
  RowVector mean = x.colwise().mean();
  RowVector var = (x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(x.rows() - 1);
  gen.running_mean = (1.0 - momentum) * gen.running_mean + momentum * mean;
  gen.running_var = (1.0 - momentum) * gen.running_var + momentum * var;
}

ad::Var discriminator_forward(ad::Tape& tape, const Discriminator& disc, ad::Var logits) {
  if (logits.cols() != disc.config.num_answers) {
    throw ContractError("discriminator_forward: expected " + std::to_string(disc.config.num_answers) + " logits per row");
  }
  if (!logits.value().allFinite()) throw NumericError("discriminator_forward: non-finite answer logits");
  const double slope = disc.config.leaky_slope;
  ad::Var h = ad::leaky_relu(ad::add_row(ad::matmul(logits, tape.param(disc.w1)), tape.param(disc.b1)), slope);
  h = ad::leaky_relu(ad::add_row(ad::matmul(h, tape.param(disc.w2)), tape.param(disc.b2)), slope);
  ad::Var out = ad::sigmoid(ad::add_row(ad::matmul(h, tape.param(disc.w3)), tape.param(disc.b3)));
  return ad::clamp(out, kScoreFloor, 1.0 - kScoreFloor);
}

Prediction predict(const VqaNet& net, const Matrix& features, std::span<const int> tokens) {
  ad::Tape tape(ad::Tape::kNoGrad);
  VqaOutput out = vqa_forward(tape, net, tape.constant(features), tokens);
  return {out.logits.value(), out.attention.value()};
}

Prediction target_forward(const TargetModel& target, const Matrix& v, std::span<const int> q) {
  return predict(target, v, q);
}

Prediction bias_forward_noise(const BiasModel& bias, const Generator& gen, const Matrix& z, std::span<const int> q,
                              NormStats stats) {
  ad::Tape tape(ad::Tape::kNoGrad);
  ad::Var generated = generator_forward(tape, gen, tape.constant(z), stats);
  VqaOutput out = vqa_forward(tape, bias, generated, q);
  return {out.logits.value(), out.attention.value()};
}

Prediction bias_forward_real(const BiasModel& bias, const Matrix& v, std::span<const int> q) {
  return predict(bias, v, q);
}

double discriminator_forward(const Discriminator& disc, const RowVector& logits) {
  ad::Tape tape(ad::Tape::kNoGrad);
  return discriminator_forward(tape, disc, tape.constant(Matrix(logits))).scalar();
}

void write_models(Archive& ar, const ModelBundle& models) {
  ar.set_meta("format", kCheckpointFormat);
  for (const auto& [k, v] : models.config.to_kv()) ar.set_meta("model." + k, v);
  models.for_each_param([&](const std::string& name, const Matrix& m) {
    // Row-major on disk.
    std::vector<double> data(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    }
    ar.put(name, {m.rows(), m.cols()}, std::span<const double>(data));
  });
  const Generator& g = models.generator;
  ar.put("generator.running_mean", {1, g.running_mean.cols()}, std::span<const double>(g.running_mean.data(), g.running_mean.size()));
  ar.put("generator.running_var", {1, g.running_var.cols()}, std::span<const double>(g.running_var.data(), g.running_var.size()));
}

ModelBundle read_models(const Archive& ar) {
  if (ar.meta("format") != kCheckpointFormat) {
    throw FormatError("format", "checkpoint format '" + ar.meta("format") + "', expected '" + kCheckpointFormat + "'");
  }
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : ar.metadata()) {
    if (k.rfind("model.", 0) == 0) kv[k.substr(6)] = v;
  }
  ModelConfig cfg = ModelConfig::from_kv(kv);
  ModelBundle models = ModelBundle::initialize(cfg);
  models.for_each_param([&](const std::string& name, Matrix& m) {
    auto data = ar.get_f64(name, {m.rows(), m.cols()});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[static_cast<std::size_t>(r * m.cols() + c)];
    }
  });
  Generator& g = models.generator;
  for (auto [name, buffer] : {std::pair{"generator.running_mean", &g.running_mean}, std::pair{"generator.running_var", &g.running_var}}) {
    auto data = ar.get_f64(name, {1, buffer->cols()});
    for (Eigen::Index c = 0; c < buffer->cols(); ++c) (*buffer)(0, c) = data[static_cast<std::size_t>(c)];
  }
  return models;
}

void save_models(const ModelBundle& models, const std::filesystem::path& path) {
  Archive ar;
  write_models(ar, models);
  ar.save(path);
}

ModelBundle load_models(const std::filesystem::path& path) { return read_models(Archive::load(path)); }

}  // namespace genb
