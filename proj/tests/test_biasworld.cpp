// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "genb/archive.hpp"
#include "genb/biasworld.hpp"
#include "genb/error.hpp"
#include "oracles.hpp"

using namespace genb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "genb_biasworld_tests";
  fs::create_directories(dir);
  return dir / name;
}

/// Empirical P(answer = 2t | qtype = t), counted directly from the instances.
std::vector<double> realized_skew(const SplitBundle& b) {
  const int T = b.spec.num_qtypes;
  std::vector<double> hit(static_cast<std::size_t>(T), 0.0), total(static_cast<std::size_t>(T), 0.0);
  for (const auto& inst : b.instances) {
    total[static_cast<std::size_t>(inst.qtype)] += 1.0;
    if (inst.answer() == 2 * inst.qtype) hit[static_cast<std::size_t>(inst.qtype)] += 1.0;
  }
  for (int t = 0; t < T; ++t) hit[static_cast<std::size_t>(t)] /= total[static_cast<std::size_t>(t)];
  return hit;
}

/// Nearest answer embedding to the signature row recorded in the metadata.
double signature_oracle_accuracy(const SplitBundle& b) {
  Eigen::MatrixXd table = answer_embeddings(b.spec);
  int correct = 0;
  for (const auto& inst : b.instances) {
    Eigen::RowVectorXd row = inst.features.row(inst.signature_index).cast<double>();
    int best = 0;
    double best_d = 1e300;
    for (Eigen::Index a = 0; a < table.rows(); ++a) {
      double d = (table.row(a) - row).squaredNorm();
      if (d < best_d) best_d = d, best = static_cast<int>(a);
    }
    correct += best == inst.answer();
  }
  return static_cast<double>(correct) / static_cast<double>(b.size());
}

Archive copy_without(const Archive& src, const std::string& skip) {
  Archive out;
  for (const auto& [k, v] : src.metadata()) out.set_meta(k, v);
  for (const auto& [name, arr] : src.arrays()) {
    if (name == skip) continue;
    switch (arr.dtype) {
      case DType::kFloat32: out.put(name, arr.shape, src.get_f32(name)); break;
      case DType::kInt32: out.put(name, arr.shape, src.get_i32(name)); break;
      case DType::kFloat64: out.put(name, arr.shape, src.get_f64(name)); break;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("generation is a pure function of seed and split") {
  DatasetSpec s = oracle::tiny_spec(7);
  CHECK(generate_split(s, Split::kTrain) == generate_split(s, Split::kTrain));
  CHECK(generate_split(s, Split::kTest) == generate_split(s, Split::kTest));
  CHECK_FALSE(generate_split(s, Split::kTrain).instances == generate_split(s, Split::kTest).instances);
  DatasetSpec other = s;
  other.seed = 8;
  CHECK_FALSE(generate_split(s, Split::kTrain).instances == generate_split(other, Split::kTrain).instances);
}

TEST_CASE("default splits realize the requested skew") {
  DatasetSpec s;
  SplitBundle train = generate_split(s, Split::kTrain);
  SplitBundle test = generate_split(s, Split::kTest);
  CHECK(train.size() == 20000);
  CHECK(test.size() == 4000);
  for (double p : realized_skew(train)) CHECK((p >= 0.88 && p <= 0.92));
  for (double p : realized_skew(test)) CHECK((p >= 0.07 && p <= 0.13));
}

TEST_CASE("signature row suffices to recover the answer") {
  DatasetSpec s;
  CHECK(signature_oracle_accuracy(generate_split(s, Split::kTrain)) >= 0.98);
  CHECK(signature_oracle_accuracy(generate_split(s, Split::kTest)) >= 0.98);
}

TEST_CASE("instance layout") {
  DatasetSpec s = oracle::tiny_spec(11);
  SplitBundle b = generate_split(s, Split::kTrain);
  Eigen::MatrixXd answers = answer_embeddings(s);
  Eigen::MatrixXd distractors = distractor_embeddings(s);
  for (Eigen::Index r = 0; r < answers.rows(); ++r) CHECK(answers.row(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
  for (Eigen::Index r = 0; r < distractors.rows(); ++r) CHECK(distractors.row(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& inst : b.instances) {
    REQUIRE(inst.features.rows() == s.objects_per_image);
    REQUIRE(inst.features.cols() == s.visual_dim);
    REQUIRE(inst.question.size() == static_cast<std::size_t>(s.question_len));
    CHECK(inst.question[0] == inst.qtype);
    for (std::size_t k = 1; k < inst.question.size(); ++k) {
      CHECK(inst.question[k] >= s.num_qtypes);
      CHECK(inst.question[k] < s.vocab_size);
    }
    CHECK(inst.answers.sum() == doctest::Approx(1.0));
    CHECK((inst.answer() == 2 * inst.qtype || inst.answer() == 2 * inst.qtype + 1));
    CHECK((inst.signature_index >= 0 && inst.signature_index < s.objects_per_image));
    // 10 sigma on a 16-dim Gaussian is far outside any plausible draw.
    Eigen::RowVectorXd sig = inst.features.row(inst.signature_index).cast<double>();
    CHECK((sig - answers.row(inst.answer())).norm() < 10.0 * s.signal_noise_sigma * std::sqrt(s.visual_dim));
  }
}

TEST_CASE("signature position is spread over all object slots") {
  SplitBundle b = generate_split(oracle::tiny_spec(2, 2000, 10), Split::kTrain);
  std::vector<int> counts(4, 0);
  for (const auto& inst : b.instances) ++counts[static_cast<std::size_t>(inst.signature_index)];
  for (int c : counts) CHECK((c > 400 && c < 600));
}

TEST_CASE("soft labels put 0.3 on the paired answer") {
  DatasetSpec s = oracle::tiny_spec(5);
  s.soft_label = true;
  for (const auto& inst : generate_split(s, Split::kTrain).instances) {
    int a = inst.answer();
    int paired = a % 2 == 0 ? a + 1 : a - 1;
    CHECK(inst.answers(a) == doctest::Approx(0.7));
    CHECK(inst.answers(paired) == doctest::Approx(0.3));
    CHECK(inst.answers.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("invalid specs are configuration errors") {
  auto bad = [](auto mutate) {
    DatasetSpec s;
    mutate(s);
    return s;
  };
  CHECK_THROWS_AS(generate_split(bad([](DatasetSpec& s) { s.train_skew = 1.2; }), Split::kTrain), ConfigError);
  CHECK_THROWS_AS(generate_split(bad([](DatasetSpec& s) { s.train_skew = 0.5; }), Split::kTrain), ConfigError);
  CHECK_THROWS_AS(generate_split(bad([](DatasetSpec& s) { s.test_skew = 0.0; }), Split::kTest), ConfigError);
  CHECK_THROWS_AS(generate_split(bad([](DatasetSpec& s) { s.num_answers = 9; }), Split::kTrain), ConfigError);
  CHECK_THROWS_AS(generate_split(bad([](DatasetSpec& s) { s.train_size = 0; }), Split::kTrain), ConfigError);
  CHECK_THROWS_AS(generate_split(bad([](DatasetSpec& s) { s.signal_noise_sigma = -0.1; }), Split::kTrain), ConfigError);
}

TEST_CASE("save and load round trip") {
  SplitBundle b = generate_split(oracle::tiny_spec(7), Split::kTest);
  auto path = scratch("seed7_test.narc");
  save_dataset(b, path);
  CHECK(load_dataset(path) == b);

  DatasetSpec soft = oracle::tiny_spec(7);
  soft.soft_label = true;
  SplitBundle sb = generate_split(soft, Split::kTrain);
  save_dataset(sb, path);
  CHECK(load_dataset(path) == sb);
}

TEST_CASE("corrupt dataset files report the offending field") {
  SplitBundle b = generate_split(oracle::tiny_spec(7), Split::kTrain);
  auto path = scratch("corrupt.narc");
  save_dataset(b, path);
  Archive good = Archive::load(path);

  copy_without(good, "answers").save(path);
  try {
    load_dataset(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.field() == "answers");
  }

  Archive wide = copy_without(good, "features");
  const auto n = static_cast<std::int64_t>(b.size());
  std::vector<float> bigger(static_cast<std::size_t>(n * 4 * 17), 0.0f);
  wide.put("features", {n, 4, 17}, bigger);
  wide.save(path);
  try {
    load_dataset(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.field() == "features");
  }

  Archive versioned = good;
  versioned.set_meta("format", "biasworld-v0");
  versioned.save(path);
  CHECK_THROWS_AS(load_dataset(path), FormatError);
}

TEST_CASE("prior table") {
  SUBCASE("single instance") {
    SplitBundle b = generate_split(oracle::tiny_spec(1), Split::kTrain);
    b.instances.resize(1);
    b.instances[0].qtype = 0;
    b.instances[0].question[0] = 0;
    b.instances[0].answers.setZero();
    b.instances[0].answers(0) = 1.0f;
    PriorTable p = prior_table(b);
    CHECK(p.defined[0]);
    CHECK(p.probs(0, 0) == 1.0);
    CHECK(p.probs.row(0).sum() == 1.0);
    for (int t = 1; t < 5; ++t) {
      CHECK_FALSE(p.defined[static_cast<std::size_t>(t)]);
      CHECK(std::isnan(p.probs(t, 0)));
    }
  }
  SUBCASE("default train prior") {
    SplitBundle b = generate_split(DatasetSpec{}, Split::kTrain);
    PriorTable p = prior_table(b);
    auto skew = realized_skew(b);
    for (int t = 0; t < 5; ++t) {
      CHECK(std::abs(p.probs.row(t).sum() - 1.0) <= 1e-9);
      CHECK(p.probs(t, 2 * t) == doctest::Approx(skew[static_cast<std::size_t>(t)]).epsilon(1e-12));
      CHECK((p.probs(t, 2 * t) > 0.88 && p.probs(t, 2 * t) < 0.92));
    }
  }
  SUBCASE("balanced answers give a uniform admissible pair") {
    SplitBundle b = generate_split(oracle::tiny_spec(4, 400, 10), Split::kTrain);
    for (std::size_t i = 0; i < b.size(); ++i) {
      auto& inst = b.instances[i];
      inst.answers.setZero();
      inst.answers(2 * inst.qtype + static_cast<int>(i % 2)) = 1.0f;
    }
    // Alternating assignment within each qtype yields exactly half/half up to one instance.
    PriorTable p = prior_table(b);
    for (int t = 0; t < 5; ++t) {
      const double n = p.counts[static_cast<std::size_t>(t)];
      CHECK(std::abs(p.probs(t, 2 * t) - 0.5) <= 1.0 / n + 0.1);
      CHECK(p.probs(t, 2 * t) + p.probs(t, 2 * t + 1) == doctest::Approx(1.0));
    }
  }
  SUBCASE("empty bundle") {
    SplitBundle b;
    CHECK_THROWS_AS(prior_table(b), DomainError);
  }
}

TEST_CASE("best question-only predictor scores the majority share") {
  DatasetSpec s;
  for (Split split : {Split::kTrain, Split::kTest}) {
    SplitBundle b = generate_split(s, split);
    PriorTable train_prior = prior_table(generate_split(s, Split::kTrain));
    int correct = 0;
    for (const auto& inst : b.instances) {
      int pick;
      train_prior.probs.row(inst.qtype).maxCoeff(&pick);
      correct += pick == inst.answer();
    }
    double acc = static_cast<double>(correct) / static_cast<double>(b.size());
    CHECK(acc == doctest::Approx(s.skew(split)).epsilon(0.03));
  }
}

TEST_CASE("batches lay out object rows per instance") {
  SplitBundle b = generate_split(oracle::tiny_spec(3), Split::kTrain);
  std::vector<std::size_t> idx{5, 0, 17};
  Batch batch = make_batch(b, idx);
  CHECK(batch.batch_size == 3);
  CHECK(batch.features.rows() == 12);
  for (int k = 0; k < 3; ++k) {
    const auto& inst = b.instances[idx[static_cast<std::size_t>(k)]];
    CHECK(batch.features.block(k * 4, 0, 4, 16).isApprox(inst.features.cast<double>()));
    CHECK(batch.tokens[static_cast<std::size_t>(k * 6)] == inst.question[0]);
    CHECK(batch.qtypes[static_cast<std::size_t>(k)] == inst.qtype);
    CHECK(batch.targets.row(k).isApprox(inst.answers.cast<double>().transpose()));
  }
  CHECK(make_full_batch(b).batch_size == static_cast<int>(b.size()));
}
