// SPDX-License-Identifier: Apache-2.0
//
// The four networks of the ensemble: target model F, bias model F_b (same
// architecture, separate storage), noise generator G and answer
// discriminator D.
//
// F and F_b are an attention VQA classifier: token embeddings feed a GRU
// whose final state is the question vector q; each
// object row v_j is scored by w^T relu(W_v v_j + W_q q + b), the softmax of
// those scores pools the objects, the pooled visual and q are projected,
// multiplied elementwise and classified by a two-layer perceptron.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genb/archive.hpp"
#include "genb/autodiff.hpp"
#include "genb/random.hpp"

namespace genb {

struct ModelConfig {
  int visual_dim = 16;     // d_v
  int question_dim = 32;   // d_q, also the token embedding width
  int objects = 4;         // n
  int num_answers = 10;    // |A|
  int question_len = 6;    // L
  int vocab_size = 32;
  int hidden_dim = 64;
  int noise_dim = 128;     // d_z
  int disc_hidden = 64;
  double leaky_slope = 0.2;
  bool batch_norm = true;  // generator output standardized per feature
  bool unit_rows = true;   // generator rows projected to unit length
  std::uint64_t init_seed = 0;

  void validate() const;
  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parameter storage shared by TargetModel and BiasModel.
struct VqaNet {
  ModelConfig config;

  Matrix token_embedding;  // [vocab, d_q]
  // GRU cell: update gate z, reset gate r, candidate n; each W_x* / W_h* is [d_q, d_q].
  Matrix gru_xz, gru_hz, gru_bz;
  Matrix gru_xr, gru_hr, gru_br;
  Matrix gru_xn, gru_hn, gru_bn;
  Matrix attn_visual;      // [d_v, h]
  Matrix attn_question;    // [d_q, h]
  Matrix attn_bias;        // [1, h]
  Matrix attn_score;       // [h, 1]
  Matrix fuse_visual;      // [d_v, h]
  Matrix fuse_visual_bias; // [1, h]
  Matrix fuse_question;    // [d_q, h]
  Matrix fuse_question_bias;
  Matrix cls_hidden;       // [h, h]
  Matrix cls_hidden_bias;
  Matrix cls_out;          // [h, |A|]
  Matrix cls_out_bias;     // [1, |A|]

  template <typename F>
  void for_each_param(F&& f) {
    visit(*this, std::forward<F>(f));
  }
  template <typename F>
  void for_each_param(F&& f) const {
    visit(*this, std::forward<F>(f));
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& s, F&& f) {
    f("qenc.embedding", s.token_embedding);
    f("qenc.W_xz", s.gru_xz);
    f("qenc.W_hz", s.gru_hz);
    f("qenc.b_z", s.gru_bz);
    f("qenc.W_xr", s.gru_xr);
    f("qenc.W_hr", s.gru_hr);
    f("qenc.b_r", s.gru_br);
    f("qenc.W_xn", s.gru_xn);
    f("qenc.W_hn", s.gru_hn);
    f("qenc.b_n", s.gru_bn);
    f("attn.W_v", s.attn_visual);
    f("attn.W_q", s.attn_question);
    f("attn.b", s.attn_bias);
    f("attn.w", s.attn_score);
    f("fuse.W_v", s.fuse_visual);
    f("fuse.b_v", s.fuse_visual_bias);
    f("fuse.W_q", s.fuse_question);
    f("fuse.b_q", s.fuse_question_bias);
    f("cls.W1", s.cls_hidden);
    f("cls.b1", s.cls_hidden_bias);
    f("cls.W2", s.cls_out);
    f("cls.b2", s.cls_out_bias);
  }
};

struct TargetModel : VqaNet {};
struct BiasModel : VqaNet {};

/// Per-object two-layer perceptron d_z -> d_v, followed by per-feature
/// standardization (batch statistics in training, running averages
/// otherwise) and row normalization, each switchable in ModelConfig.
struct Generator {
  ModelConfig config;
  Matrix w1, b1, w2, b2;
  Matrix running_mean;  // [1, d_v], not a parameter
  Matrix running_var;   // [1, d_v], not a parameter

  template <typename F>
  void for_each_param(F&& f) {
    f("W1", w1); f("b1", b1); f("W2", w2); f("b2", b2);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    f("W1", w1); f("b1", b1); f("W2", w2); f("b2", b2);
  }
};

/// Three-layer leaky-relu perceptron on answer logits, squashed to (0,1).
struct Discriminator {
  ModelConfig config;
  Matrix w1, b1, w2, b2, w3, b3;

  template <typename F>
  void for_each_param(F&& f) {
    f("W1", w1); f("b1", b1); f("W2", w2); f("b2", b2); f("W3", w3); f("b3", b3);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    f("W1", w1); f("b1", b1); f("W2", w2); f("b2", b2); f("W3", w3); f("b3", b3);
  }
};

TargetModel init_target(const ModelConfig& cfg);
BiasModel init_bias(const ModelConfig& cfg);
Generator init_generator(const ModelConfig& cfg);
Discriminator init_discriminator(const ModelConfig& cfg);

struct ModelBundle {
  ModelConfig config;
  TargetModel target;
  BiasModel bias;
  Generator generator;
  Discriminator discriminator;

  static ModelBundle initialize(const ModelConfig& cfg);

  /// Visits every parameter with its stable dotted path, e.g. "target.attn.W_v".
  template <typename F>
  void for_each_param(F&& f) {
    target.for_each_param([&](const char* n, Matrix& m) { f(std::string("target.") + n, m); });
    bias.for_each_param([&](const char* n, Matrix& m) { f(std::string("bias.") + n, m); });
    generator.for_each_param([&](const char* n, Matrix& m) { f(std::string("generator.") + n, m); });
    discriminator.for_each_param([&](const char* n, Matrix& m) { f(std::string("discriminator.") + n, m); });
  }
  template <typename F>
  void for_each_param(F&& f) const {
    target.for_each_param([&](const char* n, const Matrix& m) { f(std::string("target.") + n, m); });
    bias.for_each_param([&](const char* n, const Matrix& m) { f(std::string("bias.") + n, m); });
    generator.for_each_param([&](const char* n, const Matrix& m) { f(std::string("generator.") + n, m); });
    discriminator.for_each_param([&](const char* n, const Matrix& m) { f(std::string("discriminator.") + n, m); });
  }
};

/// (name, rows, cols) for every parameter, in visiting order.
using ShapeSignature = std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>>;
ShapeSignature shape_signature(const VqaNet& net);

// --- forward passes ---------------------------------------------------------

/// I.i.d. standard normal noise, [rows, d_z].
Matrix sample_noise(Rng& rng, int rows, int noise_dim);

struct VqaOutput {
  ad::Var logits;     // [B, |A|], raw (no sigmoid)
  ad::Var attention;  // [B, n], rows on the simplex
};

/// Differentiable forward for a batch. `features` is [B*n, d_v] (object rows
/// of instance b at b*n..b*n+n-1), `tokens` is [B*L] row-major.
VqaOutput vqa_forward(ad::Tape& tape, const VqaNet& net, ad::Var features, std::span<const int> tokens);
enum class NormStats { kRunning, kBatch };

/// G applied row-wise: [R, d_z] -> [R, d_v].
ad::Var generator_forward(ad::Tape& tape, const Generator& gen, ad::Var noise,
                          NormStats stats = NormStats::kRunning);
/// Exponential moving average (weight `momentum` on the new batch) of the
/// mean and unbiased variance of G's pre-normalization output for `noise`.
void update_running_stats(Generator& gen, const Matrix& noise, double momentum = 0.1);
/// Scores in (0,1), [B, 1]. Throws NumericError on non-finite logits.
ad::Var discriminator_forward(ad::Tape& tape, const Discriminator& disc, ad::Var logits);

// Inference helpers on plain matrices (no gradients).

struct Prediction {
  Matrix logits;     // [B, |A|]
  Matrix attention;  // [B, n]
};

Prediction predict(const VqaNet& net, const Matrix& features, std::span<const int> tokens);

/// F(v, q) for one instance: v is [n, d_v], q has L tokens.
Prediction target_forward(const TargetModel& target, const Matrix& v, std::span<const int> q);
/// F_b(G(z), q); z is [n, d_z] per instance (or [B*n, d_z] for B questions).
Prediction bias_forward_noise(const BiasModel& bias, const Generator& gen, const Matrix& z, std::span<const int> q,
                              NormStats stats = NormStats::kRunning);
/// F_b(v, q) on real image features.
Prediction bias_forward_real(const BiasModel& bias, const Matrix& v, std::span<const int> q);
/// D(y) for one logit row.
double discriminator_forward(const Discriminator& disc, const RowVector& logits);

// --- checkpoints ------------------------------------------------------------

inline constexpr const char* kCheckpointFormat = "genb-ckpt-v1";

/// Adds every parameter (float64, keyed by dotted path) and the ModelConfig
/// metadata to `ar`.
void write_models(Archive& ar, const ModelBundle& models);
/// Inverse of write_models; validates format, config and every shape.
ModelBundle read_models(const Archive& ar);

void save_models(const ModelBundle& models, const std::filesystem::path& path);
ModelBundle load_models(const std::filesystem::path& path);

}  // namespace genb
