// SPDX-License-Identifier: Apache-2.0
//
// BiasWorld: a synthetic VQA-like benchmark whose question-type -> answer
// prior is inverted between the train and test splits.
//
// Each question type t admits the answer pair {2t, 2t+1}. One object row of
// every image carries the answer signature E[a] + noise; the remaining rows
// are drawn from a separate distractor table. The image therefore fully
// determines the answer while the question type only predicts it through the
// split's skew.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace genb {

enum class Split { kTrain, kTest };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct DatasetSpec {
  int num_answers = 10;
  int num_qtypes = 5;
  int objects_per_image = 4;
  int visual_dim = 16;
  int question_len = 6;
  // Token ids [0, num_qtypes) encode the question type; the rest are nuisance.
  int vocab_size = 32;
  int num_distractors = 32;
  double train_skew = 0.9;
  double test_skew = 0.1;
  int train_size = 20000;
  int test_size = 4000;
  double signal_noise_sigma = 0.1;
  std::uint64_t seed = 0;
  // Mixes 0.3 of the label mass onto the paired answer.
  bool soft_label = false;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  int size(Split s) const { return s == Split::kTrain ? train_size : test_size; }
  double skew(Split s) const { return s == Split::kTrain ? train_skew : test_skew; }

  std::map<std::string, std::string> to_kv() const;
  static DatasetSpec from_kv(const std::map<std::string, std::string>& kv);

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct VQAInstance {
  Eigen::MatrixXf features;           // [n, d_v]
  std::vector<std::int32_t> question; // [L]; question[0] is the qtype token
  int qtype = 0;
  Eigen::VectorXf answers;            // [|A|], ground-truth answer probability
  int signature_index = -1;           // -1 when unknown (real data)

  /// Index of the largest ground-truth entry (the answer for one-hot labels).
  int answer() const;

  friend bool operator==(const VQAInstance& a, const VQAInstance& b);
};

struct SplitBundle {
  std::vector<VQAInstance> instances;
  Split split = Split::kTrain;
  DatasetSpec spec;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }

  friend bool operator==(const SplitBundle&, const SplitBundle&) = default;
};

/// Fixed unit-norm answer embedding rows, [|A|, d_v]; a function of spec.seed.
Eigen::MatrixXd answer_embeddings(const DatasetSpec& spec);
/// Unit-norm distractor rows, [num_distractors, d_v], from a separate stream.
Eigen::MatrixXd distractor_embeddings(const DatasetSpec& spec);

/// Deterministic in (spec, split).
SplitBundle generate_split(const DatasetSpec& spec, Split split);

inline constexpr const char* kDatasetFormat = "biasworld-v1";

void save_dataset(const SplitBundle& bundle, const std::filesystem::path& path);
/// Throws FormatError naming the offending array or key.
SplitBundle load_dataset(const std::filesystem::path& path);

struct PriorTable {
  Eigen::MatrixXd probs;       // [T, |A|]; NaN rows where undefined
  std::vector<bool> defined;   // false for qtypes with no instances
  std::vector<int> counts;     // instances per qtype
};

/// Empirical per-qtype answer marginal. Throws DomainError on an empty bundle.
PriorTable prior_table(const SplitBundle& bundle);

/// A training/eval mini-batch in the layout the networks consume.
struct Batch {
  Eigen::MatrixXd features;        // [B*n, d_v], object rows of instance b at b*n..b*n+n-1
  std::vector<int> tokens;         // [B*L] row-major
  Eigen::MatrixXd targets;         // [B, |A|]
  std::vector<int> qtypes;         // [B]
  int batch_size = 0;
  int question_len = 0;
  int objects = 0;
};

Batch make_batch(const SplitBundle& bundle, std::span<const std::size_t> indices);
/// Batch of every instance, in order.
Batch make_full_batch(const SplitBundle& bundle);

}  // namespace genb
