// SPDX-License-Identifier: Apache-2.0
#include "genb/biasworld.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "genb/archive.hpp"
#include "genb/error.hpp"
#include "genb/random.hpp"

namespace genb {
namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

int parse_int(const std::map<std::string, std::string>& kv, const std::string& key, int fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    long long v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError("dataset spec key '" + key + "' is not an integer: '" + it->second + "'");
  }
}

double parse_double(const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("dataset spec key '" + key + "' is not a number: '" + it->second + "'");
  }
}

Eigen::MatrixXd unit_rows(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m = rng.normal_matrix(rows, cols);
  for (int r = 0; r < rows; ++r) m.row(r).normalize();
  return m;
}

}  // namespace

const char* split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split tag '" + name + "'");
}

void DatasetSpec::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("invalid dataset spec: " + msg);
  };
  require(num_qtypes > 0, "num_qtypes must be positive");
  require(num_answers == 2 * num_qtypes, "num_answers must equal 2 * num_qtypes");
  require(objects_per_image > 0, "objects_per_image must be positive");
  require(visual_dim > 0, "visual_dim must be positive");
  require(question_len > 0, "question_len must be positive");
  require(vocab_size > num_qtypes || (question_len == 1 && vocab_size >= num_qtypes),
          "vocab_size must exceed num_qtypes to leave room for nuisance tokens");
  require(num_distractors > 0, "num_distractors must be positive");
  require(train_size > 0 && test_size > 0, "split sizes must be positive");
  require(train_skew > 0.5 && train_skew < 1.0, "train_skew must lie in (0.5, 1)");
  require(test_skew > 0.0 && test_skew < 0.5, "test_skew must lie in (0, 0.5)");
  require(std::isfinite(signal_noise_sigma) && signal_noise_sigma >= 0.0, "signal_noise_sigma must be >= 0");
}

std::map<std::string, std::string> DatasetSpec::to_kv() const {
  return {
      {"num_answers", std::to_string(num_answers)},
      {"num_qtypes", std::to_string(num_qtypes)},
      {"objects_per_image", std::to_string(objects_per_image)},
      {"visual_dim", std::to_string(visual_dim)},
      {"question_len", std::to_string(question_len)},
      {"vocab_size", std::to_string(vocab_size)},
      {"num_distractors", std::to_string(num_distractors)},
      {"train_skew", fmt_double(train_skew)},
      {"test_skew", fmt_double(test_skew)},
      {"train_size", std::to_string(train_size)},
      {"test_size", std::to_string(test_size)},
      {"signal_noise_sigma", fmt_double(signal_noise_sigma)},
      {"seed", std::to_string(seed)},
      {"soft_label", soft_label ? "true" : "false"},
  };
}

DatasetSpec DatasetSpec::from_kv(const std::map<std::string, std::string>& kv) {
  DatasetSpec s;
  s.num_answers = parse_int(kv, "num_answers", s.num_answers);
  s.num_qtypes = parse_int(kv, "num_qtypes", s.num_qtypes);
  s.objects_per_image = parse_int(kv, "objects_per_image", s.objects_per_image);
  s.visual_dim = parse_int(kv, "visual_dim", s.visual_dim);
  s.question_len = parse_int(kv, "question_len", s.question_len);
  s.vocab_size = parse_int(kv, "vocab_size", s.vocab_size);
  s.num_distractors = parse_int(kv, "num_distractors", s.num_distractors);
  s.train_skew = parse_double(kv, "train_skew", s.train_skew);
  s.test_skew = parse_double(kv, "test_skew", s.test_skew);
  s.train_size = parse_int(kv, "train_size", s.train_size);
  s.test_size = parse_int(kv, "test_size", s.test_size);
  s.signal_noise_sigma = parse_double(kv, "signal_noise_sigma", s.signal_noise_sigma);
  if (auto it = kv.find("seed"); it != kv.end()) {
    try {
      s.seed = std::stoull(it->second);
    } catch (const std::exception&) {
      throw ConfigError("dataset spec key 'seed' is not an unsigned integer: '" + it->second + "'");
    }
  }
  if (auto it = kv.find("soft_label"); it != kv.end()) {
    if (it->second != "true" && it->second != "false") throw ConfigError("soft_label must be true or false");
    s.soft_label = it->second == "true";
  }
  return s;
}

int VQAInstance::answer() const {
  Eigen::Index idx = 0;
  answers.maxCoeff(&idx);
  return static_cast<int>(idx);
}

bool operator==(const VQAInstance& a, const VQAInstance& b) {
  return a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
         a.features == b.features && a.question == b.question && a.qtype == b.qtype &&
         a.answers.size() == b.answers.size() && a.answers == b.answers && a.signature_index == b.signature_index;
}

Eigen::MatrixXd answer_embeddings(const DatasetSpec& spec) {
  Rng rng = Rng::derive(spec.seed, "biasworld/answer_table");
  return unit_rows(rng, spec.num_answers, spec.visual_dim);
}

Eigen::MatrixXd distractor_embeddings(const DatasetSpec& spec) {
  Rng rng = Rng::derive(spec.seed, "biasworld/distractor_table");
  return unit_rows(rng, spec.num_distractors, spec.visual_dim);
}

SplitBundle generate_split(const DatasetSpec& spec, Split split) {
  spec.validate();
  const Eigen::MatrixXd answer_table = answer_embeddings(spec);
  const Eigen::MatrixXd distractor_table = distractor_embeddings(spec);
  Rng rng = Rng::derive(spec.seed, std::string("biasworld/instances/") + split_name(split));

  const int n = spec.objects_per_image;
  const int dv = spec.visual_dim;
  const double skew = spec.skew(split);
  const double sigma = spec.signal_noise_sigma;
  const int nuisance = spec.vocab_size - spec.num_qtypes;

  SplitBundle bundle;
  bundle.split = split;
  bundle.spec = spec;
  bundle.instances.reserve(static_cast<std::size_t>(spec.size(split)));

  for (int i = 0; i < spec.size(split); ++i) {
    VQAInstance inst;
    inst.qtype = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_qtypes)));
    const int majority = 2 * inst.qtype;
    const int answer = rng.bernoulli(skew) ? majority : majority + 1;
    const int paired = answer == majority ? majority + 1 : majority;

    inst.question.resize(static_cast<std::size_t>(spec.question_len));
    inst.question[0] = inst.qtype;
    for (int t = 1; t < spec.question_len; ++t) {
      inst.question[static_cast<std::size_t>(t)] =
          spec.num_qtypes + static_cast<int>(rng.below(static_cast<std::uint64_t>(nuisance)));
    }

    inst.signature_index = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    Eigen::MatrixXd rows(n, dv);
    for (int j = 0; j < n; ++j) {
      if (j == inst.signature_index) {
        rows.row(j) = answer_table.row(answer);
      } else {
        rows.row(j) = distractor_table.row(static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_distractors))));
      }
      for (int c = 0; c < dv; ++c) rows(j, c) += sigma * rng.normal();
    }
    inst.features = rows.cast<float>();

    inst.answers = Eigen::VectorXf::Zero(spec.num_answers);
    if (spec.soft_label) {
      inst.answers(answer) = 0.7f;
      inst.answers(paired) = 0.3f;
    } else {
      inst.answers(answer) = 1.0f;
    }
    bundle.instances.push_back(std::move(inst));
  }
  return bundle;
}

void save_dataset(const SplitBundle& bundle, const std::filesystem::path& path) {
  const DatasetSpec& spec = bundle.spec;
  const auto count = static_cast<std::int64_t>(bundle.size());
  const int n = spec.objects_per_image;
  const int dv = spec.visual_dim;
  const int len = spec.question_len;
  const int na = spec.num_answers;

  std::vector<float> features;
  std::vector<std::int32_t> questions;
  std::vector<std::int32_t> qtypes;
  std::vector<float> answers;
  std::vector<std::int32_t> signature;
  features.reserve(static_cast<std::size_t>(count * n * dv));
  for (const auto& inst : bundle.instances) {
    if (inst.features.rows() != n || inst.features.cols() != dv || inst.question.size() != static_cast<std::size_t>(len) ||
        inst.answers.size() != na) {
      throw ContractError("save_dataset: instance shape disagrees with bundle spec");
    }
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c < dv; ++c) features.push_back(inst.features(j, c));
    }
    questions.insert(questions.end(), inst.question.begin(), inst.question.end());
    qtypes.push_back(inst.qtype);
    for (int a = 0; a < na; ++a) answers.push_back(inst.answers(a));
    signature.push_back(inst.signature_index);
  }

  Archive ar;
  ar.set_meta("format", kDatasetFormat);
  ar.set_meta("split", split_name(bundle.split));
  for (const auto& [k, v] : spec.to_kv()) ar.set_meta("spec." + k, v);
  ar.put("features", {count, n, dv}, std::span<const float>(features));
  ar.put("questions", {count, len}, std::span<const std::int32_t>(questions));
  ar.put("qtypes", {count}, std::span<const std::int32_t>(qtypes));
  ar.put("answers", {count, na}, std::span<const float>(answers));
  ar.put("signature_index", {count}, std::span<const std::int32_t>(signature));
  ar.save(path);
}

SplitBundle load_dataset(const std::filesystem::path& path) {
  Archive ar = Archive::load(path);
  if (ar.meta("format") != kDatasetFormat) {
    throw FormatError("format", "dataset format version '" + ar.meta("format") + "', expected '" + kDatasetFormat + "'");
  }
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : ar.metadata()) {
    if (k.rfind("spec.", 0) == 0) kv[k.substr(5)] = v;
  }
  SplitBundle bundle;
  bundle.spec = DatasetSpec::from_kv(kv);
  bundle.split = parse_split(ar.meta("split"));
  const DatasetSpec& spec = bundle.spec;

  const auto& qt = ar.array("qtypes");
  if (qt.shape.size() != 1) throw FormatError("qtypes", "array 'qtypes' must be rank 1");
  const std::int64_t count = qt.shape[0];
  const int n = spec.objects_per_image;
  const int dv = spec.visual_dim;
  const int len = spec.question_len;
  const int na = spec.num_answers;

  auto features = ar.get_f32("features", {count, n, dv});
  auto questions = ar.get_i32("questions", {count, len});
  auto qtypes = ar.get_i32("qtypes", {count});
  auto answers = ar.get_f32("answers", {count, na});
  auto signature = ar.get_i32("signature_index", {count});

  bundle.instances.resize(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    VQAInstance& inst = bundle.instances[static_cast<std::size_t>(i)];
    inst.features.resize(n, dv);
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c < dv; ++c) inst.features(j, c) = features[static_cast<std::size_t>((i * n + j) * dv + c)];
    }
    inst.question.assign(questions.begin() + i * len, questions.begin() + (i + 1) * len);
    inst.qtype = qtypes[static_cast<std::size_t>(i)];
    if (inst.qtype < 0 || inst.qtype >= spec.num_qtypes) {
      throw FormatError("qtypes", "qtype " + std::to_string(inst.qtype) + " out of range at row " + std::to_string(i));
    }
    for (auto tok : inst.question) {
      if (tok < 0 || tok >= spec.vocab_size) {
        throw FormatError("questions", "token id " + std::to_string(tok) + " out of range at row " + std::to_string(i));
      }
    }
    inst.answers.resize(na);
    for (int a = 0; a < na; ++a) {
      float y = answers[static_cast<std::size_t>(i * na + a)];
      if (!(y >= 0.0f && y <= 1.0f)) {
        throw FormatError("answers", "answer score outside [0,1] at row " + std::to_string(i));
      }
      inst.answers(a) = y;
    }
    inst.signature_index = signature[static_cast<std::size_t>(i)];
  }
  return bundle;
}

PriorTable prior_table(const SplitBundle& bundle) {
  if (bundle.empty()) throw DomainError("prior_table: empty bundle");
  const int nq = bundle.spec.num_qtypes;
  const int na = bundle.spec.num_answers;
  PriorTable table;
  table.probs = Eigen::MatrixXd::Zero(nq, na);
  table.counts.assign(static_cast<std::size_t>(nq), 0);
  for (const auto& inst : bundle.instances) {
    table.probs.row(inst.qtype) += inst.answers.cast<double>().transpose();
    ++table.counts[static_cast<std::size_t>(inst.qtype)];
  }
  table.defined.assign(static_cast<std::size_t>(nq), false);
  for (int t = 0; t < nq; ++t) {
    double mass = table.probs.row(t).sum();
    if (table.counts[static_cast<std::size_t>(t)] == 0 || mass <= 0.0) {
      table.probs.row(t).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    table.probs.row(t) /= mass;
    table.defined[static_cast<std::size_t>(t)] = true;
  }
  return table;
}

Batch make_batch(const SplitBundle& bundle, std::span<const std::size_t> indices) {
  const DatasetSpec& spec = bundle.spec;
  const int n = spec.objects_per_image;
  const int len = spec.question_len;
  Batch batch;
  batch.batch_size = static_cast<int>(indices.size());
  batch.objects = n;
  batch.question_len = len;
  batch.features.resize(batch.batch_size * n, spec.visual_dim);
  batch.targets.resize(batch.batch_size, spec.num_answers);
  batch.tokens.resize(static_cast<std::size_t>(batch.batch_size * len));
  batch.qtypes.resize(indices.size());
  for (int b = 0; b < batch.batch_size; ++b) {
    const VQAInstance& inst = bundle.instances.at(indices[static_cast<std::size_t>(b)]);
    batch.features.middleRows(b * n, n) = inst.features.cast<double>();
    batch.targets.row(b) = inst.answers.cast<double>().transpose();
    std::copy(inst.question.begin(), inst.question.end(), batch.tokens.begin() + b * len);
    batch.qtypes[static_cast<std::size_t>(b)] = inst.qtype;
  }
  return batch;
}

Batch make_full_batch(const SplitBundle& bundle) {
  std::vector<std::size_t> idx(bundle.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return make_batch(bundle, idx);
}

}  // namespace genb
