// SPDX-License-Identifier: Apache-2.0
//
// RunReport and its serialized forms: a JSON document (schema
// "genb-report-v1") plus CSV tables. Per-qtype columns play the role of the
// answer-category columns (Yes/No, Num, Other) of a VQA results table.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "genb/biasworld.hpp"
#include "genb/config.hpp"
#include "genb/eval.hpp"

namespace genb {

inline constexpr const char* kReportSchema = "genb-report-v1";

struct SplitStatistics {
  Split split = Split::kTrain;
  int count = 0;
  std::vector<int> qtype_counts;
  Matrix prior;  // [T, |A|]
};

struct BiasDiagnostics {
  std::vector<double> prior_tv;
  std::vector<double> prior_kl;
  double mean_prior_tv = 0.0;
  double test_accuracy_noise = 0.0;
  double test_accuracy_real = 0.0;
  double attention_dispersion = 0.0;  // mean over studied instances
};

struct HistoryEntry {
  int epoch = 0;
  long long step = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct RunReport {
  std::string status = "ok";  // "ok" | "nan_abort"
  KeyValues config;
  KeyValues dataset;
  std::uint64_t seed = 0;
  double wall_clock_seconds = 0.0;
  std::vector<SplitStatistics> split_stats;
  std::optional<SplitMetrics> train;
  std::optional<SplitMetrics> test;
  std::optional<double> ood_gap;  // train accuracy - test accuracy
  std::optional<BiasDiagnostics> bias;
  std::vector<HistoryEntry> history;
};

SplitStatistics split_statistics(const SplitBundle& bundle);

std::string report_to_json(const RunReport& report);
/// Throws FormatError("schema") on a missing or foreign schema tag and
/// FormatError naming the field on structural problems.
RunReport report_from_json(const std::string& text);

void write_report(const RunReport& report, const std::filesystem::path& path);
RunReport read_report(const std::filesystem::path& path);

/// "split,qtype,count,accuracy" rows for every evaluated split.
std::string per_qtype_csv(const RunReport& report);

}  // namespace genb
