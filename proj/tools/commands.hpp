// SPDX-License-Identifier: Apache-2.0
//
// Entry points of the `genb` tool. Each command returns a process exit code:
// 0 success, 1 runtime failure, 2 usage/config error, 3 NaN abort.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "genb/biasworld.hpp"
#include "genb/config.hpp"

namespace genb::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsageError = 2, kNanAbort = 3 };

inline constexpr const char* kTrainFile = "train.narc";
inline constexpr const char* kTestFile = "test.narc";

struct GenOptions {
  DatasetSpec spec;
  std::filesystem::path out;
};
int cmd_gen(const GenOptions& opt, std::ostream& out, std::ostream& err);

struct TrainOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path data;
  std::filesystem::path out;
  std::vector<std::string> overrides;  // "key=value"
  std::optional<std::filesystem::path> resume;
  bool quiet = false;
};
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
};
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);

/// One row of an ablation grid: config overrides applied on top of the base.
struct Variant {
  std::string name;
  std::optional<std::filesystem::path> config;
  KeyValues overrides;
};

struct ExperimentManifest {
  std::filesystem::path data;
  std::optional<std::filesystem::path> base_config;
  std::vector<std::uint64_t> seeds;
  std::vector<Variant> variants;
  KeyValues common;  // applied to every variant before its own overrides
};

/// Built-in grids: "enstrain" (bias-model loss switches) and "lossabla"
/// (bias-model variant x debiasing loss).
std::vector<Variant> builtin_grid(const std::string& name);

/// JSON manifest; relative paths resolve against `base_dir`. Throws
/// ConfigError on an empty or invalid manifest.
ExperimentManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir);

struct AblateOptions {
  std::filesystem::path manifest;
  std::filesystem::path out;
  int jobs = 1;
  bool quiet = false;
};
int cmd_ablate(const AblateOptions& opt, std::ostream& out, std::ostream& err);

struct ReportOptions {
  std::vector<std::filesystem::path> runs;
  std::filesystem::path out;
};
int cmd_report(const ReportOptions& opt, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches.
int run(int argc, char** argv);

}  // namespace genb::cli
