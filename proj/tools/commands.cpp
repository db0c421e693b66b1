// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "genb/error.hpp"
#include "genb/eval.hpp"
#include "genb/models.hpp"
#include "genb/report.hpp"
#include "genb/trainer.hpp"
#include "plot.hpp"

namespace genb::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed(double x, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void print_prior(std::ostream& out, const SplitBundle& bundle) {
  PriorTable table = prior_table(bundle);
  out << split_name(bundle.split) << " prior (rows: qtype, cols: answer)\n";
  for (Eigen::Index t = 0; t < table.probs.rows(); ++t) {
    out << "  qtype " << t << " (n=" << table.counts[static_cast<std::size_t>(t)] << "):";
    for (Eigen::Index a = 0; a < table.probs.cols(); ++a) out << ' ' << fixed(table.probs(t, a), 3);
    out << '\n';
  }
}

KeyValues parse_overrides(const std::vector<std::string>& items) {
  KeyValues kv;
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "' is not key=value");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

struct LoadedData {
  SplitBundle train;
  SplitBundle test;
};

LoadedData load_data_dir(const fs::path& dir) {
  return {load_dataset(dir / kTrainFile), load_dataset(dir / kTestFile)};
}

struct RunOutcome {
  int exit_code = kOk;
  std::optional<RunReport> report;
  std::string message;
};

/// Trains one configuration and writes every run artifact into `out_dir`.
RunOutcome run_training(const TrainConfig& cfg, const LoadedData& data, const fs::path& out_dir,
                        const std::optional<fs::path>& resume, std::ostream* progress) {
  fs::create_directories(out_dir);
  write_text(out_dir / "config.txt", format_key_values(cfg.to_kv()));

  std::ofstream losses(out_dir / "losses.csv", resume ? std::ios::app : std::ios::trunc);
  if (!resume) losses << kLossCsvHeader << '\n';

  genb::TrainOptions options;
  options.out_dir = out_dir;
  options.resume_from = resume;
  options.on_step = [&](const LossRecord& r) { losses << to_csv_row(r) << '\n'; };
  if (progress) {
    options.on_eval = [progress](const HistoryEntry& h) {
      *progress << "epoch " << h.epoch << " step " << h.step << "  train acc " << fixed(h.train_accuracy)
                << "  test acc " << fixed(h.test_accuracy) << std::endl;
    };
  }
  TrainResult result = train(cfg, data.train, data.test, options);
  losses.close();

  write_report(result.report, out_dir / "report.json");
  write_text(out_dir / "per_qtype.csv", per_qtype_csv(result.report));
  write_text(out_dir / "attention.csv", attention_csv(result));

  RunOutcome outcome;
  outcome.report = result.report;
  if (result.nan_abort) {
    outcome.exit_code = kNanAbort;
    outcome.message = result.abort_message;
  }
  return outcome;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

int cmd_gen(const GenOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    opt.spec.validate();
    fs::create_directories(opt.out);
    out << "dataset spec:\n" << format_key_values(opt.spec.to_kv());
    for (Split s : {Split::kTrain, Split::kTest}) {
      SplitBundle bundle = generate_split(opt.spec, s);
      fs::path path = opt.out / (s == Split::kTrain ? kTrainFile : kTestFile);
      save_dataset(bundle, path);
      out << "wrote " << path.string() << " (" << bundle.size() << " instances)\n";
      print_prior(out, bundle);
    }
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  LoadedData data;
  try {
    cfg = opt.config ? TrainConfig::from_kv(load_key_values(*opt.config)) : TrainConfig{};
    cfg = cfg.with(parse_overrides(opt.overrides));
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  try {
    data = load_data_dir(opt.data);
    RunOutcome outcome = run_training(cfg, data, opt.out, opt.resume, opt.quiet ? nullptr : &out);
    if (outcome.exit_code == kNanAbort) {
      err << "aborted: " << outcome.message << '\n';
      return kNanAbort;
    }
    const RunReport& r = *outcome.report;
    if (r.test) {
      out << "train acc " << fixed(r.train->accuracy) << "  test acc " << fixed(r.test->accuracy) << "  ood gap "
          << fixed(*r.ood_gap) << '\n';
    } else {
      out << "no training epochs run; wrote split statistics only\n";
    }
    out << "artifacts in " << opt.out.string() << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    ModelBundle models = load_models(opt.checkpoint);
    LoadedData data = load_data_dir(opt.data);
    json j;
    for (const SplitBundle* b : {&data.train, &data.test}) {
      SplitMetrics m = evaluate_model(models.target, *b);
      json per = json::array();
      for (const auto& q : m.per_qtype) per.push_back({{"qtype", q.qtype}, {"count", q.count}, {"accuracy", q.accuracy}});
      j[split_name(b->split)] = {{"accuracy", m.accuracy}, {"count", m.count}, {"per_qtype", per}};
    }
    out << j.dump(2) << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

std::vector<Variant> builtin_grid(const std::string& name) {
  if (name == "enstrain") {
    return {
        {"BCE target (no bias model)", std::nullopt, {{"debias_loss", "plain"}}},
        {"GenB: BCE", std::nullopt, {{"use_gan", "false"}, {"use_distill", "false"}}},
        {"GenB: BCE+DSC", std::nullopt, {{"use_distill", "false"}}},
        {"GenB: BCE+Distill", std::nullopt, {{"use_gan", "false"}}},
        {"GenB: BCE+DSC+Distill", std::nullopt, {}},
    };
  }
  if (name == "lossabla") {
    return {
        {"plain / vanilla", std::nullopt, {{"debias_loss", "plain"}, {"bias_model", "vanilla"}}},
        {"suppressed / vanilla", std::nullopt, {{"debias_loss", "suppressed"}, {"bias_model", "vanilla"}}},
        {"genb loss / vanilla", std::nullopt, {{"debias_loss", "genb"}, {"bias_model", "vanilla"}}},
        {"suppressed / GenB", std::nullopt, {{"debias_loss", "suppressed"}, {"bias_model", "genb"}}},
        {"genb loss / GenB", std::nullopt, {{"debias_loss", "genb"}, {"bias_model", "genb"}}},
    };
  }
  throw ConfigError("unknown grid '" + name + "' (expected enstrain|lossabla)");
}

ExperimentManifest parse_manifest(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.empty()) throw ConfigError("empty manifest");
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
  auto as_kv = [](const json& obj) {
    KeyValues kv;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      kv[it.key()] = it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
    }
    return kv;
  };

  ExperimentManifest m;
  try {
    if (!j.contains("data")) throw ConfigError("manifest: missing 'data'");
    m.data = resolve(j.at("data").get<std::string>());
    if (j.contains("base_config")) m.base_config = resolve(j["base_config"].get<std::string>());
    if (j.contains("common")) m.common = as_kv(j["common"]);
    if (!j.contains("seeds") || j["seeds"].empty()) throw ConfigError("manifest: 'seeds' must be a nonempty list");
    m.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("grid")) {
      auto grid = builtin_grid(j["grid"].get<std::string>());
      m.variants.insert(m.variants.end(), grid.begin(), grid.end());
    }
    if (j.contains("variants")) {
      for (const auto& v : j["variants"]) {
        Variant var;
        var.name = v.at("name").get<std::string>();
        if (v.contains("config")) var.config = resolve(v["config"].get<std::string>());
        if (v.contains("set")) var.overrides = as_kv(v["set"]);
        m.variants.push_back(std::move(var));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  if (m.variants.empty()) throw ConfigError("manifest: no variants (set 'grid' or 'variants')");
  std::set<std::uint64_t> distinct(m.seeds.begin(), m.seeds.end());
  if (distinct.size() != m.seeds.size()) throw ConfigError("manifest: seeds must be distinct");
  std::set<std::string> names;
  for (const auto& v : m.variants) {
    if (v.name.empty() || !names.insert(v.name).second) throw ConfigError("manifest: variant names must be unique and nonempty");
  }
  return m;
}

namespace {

std::string slug(const std::string& name) {
  std::string s;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!s.empty() && s.back() != '_') {
      s += '_';
    }
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s.empty() ? "variant" : s;
}

}  // namespace

int cmd_ablate(const AblateOptions& opt, std::ostream& out, std::ostream& err) {
  ExperimentManifest manifest;
  std::vector<TrainConfig> configs;
  try {
    manifest = parse_manifest(read_text(opt.manifest), opt.manifest.parent_path());
    TrainConfig base = manifest.base_config ? TrainConfig::from_kv(load_key_values(*manifest.base_config)) : TrainConfig{};
    base = base.with(manifest.common);
    for (const auto& v : manifest.variants) {
      TrainConfig c = v.config ? TrainConfig::from_kv(load_key_values(*v.config)).with(manifest.common) : base;
      c = c.with(v.overrides);
      c.validate();
      configs.push_back(c);
    }
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  }

  LoadedData data;
  try {
    data = load_data_dir(manifest.data);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }

  struct Job {
    std::size_t variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < manifest.variants.size(); ++v) {
    for (auto seed : manifest.seeds) jobs.push_back({v, seed});
  }
  std::vector<RunOutcome> outcomes(jobs.size());
  std::mutex io;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(io);
        if (next >= jobs.size()) return;
        i = next++;
      }
      const Job& job = jobs[i];
      TrainConfig cfg = configs[job.variant];
      cfg.seed = job.seed;
      fs::path dir = opt.out / slug(manifest.variants[job.variant].name) / ("seed" + std::to_string(job.seed));
      try {
        outcomes[i] = run_training(cfg, data, dir, std::nullopt, nullptr);
      } catch (const std::exception& e) {
        outcomes[i].exit_code = kRuntimeFailure;
        outcomes[i].message = e.what();
      }
      std::lock_guard<std::mutex> lock(io);
      if (!opt.quiet) {
        out << manifest.variants[job.variant].name << " seed " << job.seed << ": ";
        if (outcomes[i].report && outcomes[i].report->test) {
          out << "test acc " << fixed(outcomes[i].report->test->accuracy) << '\n';
        } else {
          out << "failed (" << outcomes[i].message << ")\n";
        }
        out.flush();
      }
    }
  };
  const int threads = std::max(1, opt.jobs);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Aggregate test-split (inverted prior) accuracy per variant.
  const int nq = data.train.spec.num_qtypes;
  std::ostringstream csv;
  csv << "variant,runs,failures,all_mean,all_sd";
  for (int t = 0; t < nq; ++t) csv << ",qtype" << t << "_mean,qtype" << t << "_sd";
  csv << ",train_all_mean,bias_prior_tv_mean\n";
  std::vector<plot::Bar> bars;
  bool any_failure = false;
  for (std::size_t v = 0; v < manifest.variants.size(); ++v) {
    std::vector<double> all, train_all, tv;
    std::vector<std::vector<double>> per(static_cast<std::size_t>(nq));
    int failures = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].variant != v) continue;
      const RunOutcome& o = outcomes[i];
      if (o.exit_code != kOk || !o.report || !o.report->test) {
        ++failures;
        continue;
      }
      all.push_back(o.report->test->accuracy);
      train_all.push_back(o.report->train->accuracy);
      if (o.report->bias) tv.push_back(o.report->bias->mean_prior_tv);
      for (int t = 0; t < nq; ++t) per[static_cast<std::size_t>(t)].push_back(o.report->test->per_qtype[static_cast<std::size_t>(t)].accuracy);
    }
    any_failure = any_failure || failures > 0;
    std::string name = manifest.variants[v].name;
    std::string quoted = "\"" + name + "\"";
    csv << quoted << ',' << all.size() + static_cast<std::size_t>(failures) << ',' << failures << ','
        << fixed(mean_of(all), 6) << ',' << fixed(sd_of(all), 6);
    for (int t = 0; t < nq; ++t) {
      csv << ',' << fixed(mean_of(per[static_cast<std::size_t>(t)]), 6) << ','
          << fixed(sd_of(per[static_cast<std::size_t>(t)]), 6);
    }
    csv << ',' << fixed(mean_of(train_all), 6) << ',' << fixed(mean_of(tv), 6) << '\n';
    bars.push_back({name, all.empty() ? 0.0 : mean_of(all), sd_of(all)});
  }
  try {
    fs::create_directories(opt.out);
    write_text(opt.out / "ablation.csv", csv.str());
    write_text(opt.out / "ablation.svg",
               plot::bar_chart_svg("Test-split (inverted prior) accuracy, mean +- sd over seeds", "accuracy", bars));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  if (!opt.quiet) out << csv.str();
  return any_failure ? kRuntimeFailure : kOk;
}

int cmd_report(const ReportOptions& opt, std::ostream& out, std::ostream& err) {
  if (opt.runs.empty()) {
    err << "usage error: at least one run directory is required\n";
    return kUsageError;
  }
  std::vector<RunReport> reports;
  try {
    for (const auto& dir : opt.runs) reports.push_back(read_report(dir / "report.json"));
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }

  std::ostringstream md;
  md << "# Run comparison\n\n| metric |";
  for (const auto& dir : opt.runs) md << ' ' << dir.filename().string() << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < opt.runs.size(); ++i) md << "---|";
  md << '\n';
  auto row = [&](const std::string& label, auto value_of) {
    md << "| " << label << " |";
    for (const auto& r : reports) md << ' ' << value_of(r) << " |";
    md << '\n';
  };
  auto opt_fixed = [](const auto& o, auto get) { return o ? fixed(get(*o)) : std::string("-"); };
  row("status", [](const RunReport& r) { return r.status; });
  row("seed", [](const RunReport& r) { return std::to_string(r.seed); });
  row("debias_loss", [](const RunReport& r) { return r.config.count("debias_loss") ? r.config.at("debias_loss") : "-"; });
  row("bias_model", [](const RunReport& r) { return r.config.count("bias_model") ? r.config.at("bias_model") : "-"; });
  row("train accuracy", [&](const RunReport& r) { return opt_fixed(r.train, [](const SplitMetrics& m) { return m.accuracy; }); });
  row("test accuracy", [&](const RunReport& r) { return opt_fixed(r.test, [](const SplitMetrics& m) { return m.accuracy; }); });
  row("ood gap", [&](const RunReport& r) { return opt_fixed(r.ood_gap, [](double g) { return g; }); });
  const std::size_t nq = reports.front().test ? reports.front().test->per_qtype.size() : 0;
  for (std::size_t t = 0; t < nq; ++t) {
    row("test qtype " + std::to_string(t), [&](const RunReport& r) {
      return r.test && t < r.test->per_qtype.size() ? fixed(r.test->per_qtype[t].accuracy) : std::string("-");
    });
  }
  row("bias prior TV (mean)", [&](const RunReport& r) {
    return opt_fixed(r.bias, [](const BiasDiagnostics& b) { return b.mean_prior_tv; });
  });
  row("bias test acc (noise)", [&](const RunReport& r) {
    return opt_fixed(r.bias, [](const BiasDiagnostics& b) { return b.test_accuracy_noise; });
  });
  row("bias attention dispersion", [&](const RunReport& r) {
    return opt_fixed(r.bias, [](const BiasDiagnostics& b) { return b.attention_dispersion; });
  });
  row("wall clock (s)", [](const RunReport& r) { return fixed(r.wall_clock_seconds, 1); });

  std::vector<plot::Bar> bars;
  std::ostringstream gallery;
  gallery << "run,";
  bool header_done = false;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    bars.push_back({opt.runs[i].filename().string(), reports[i].ood_gap.value_or(0.0), 0.0});
    std::ifstream att(opt.runs[i] / "attention.csv");
    std::string line;
    if (!att || !std::getline(att, line)) continue;
    if (!header_done) {
      gallery << line << '\n';
      header_done = true;
    }
    while (std::getline(att, line)) gallery << opt.runs[i].filename().string() << ',' << line << '\n';
  }
  try {
    fs::create_directories(opt.out);
    write_text(opt.out / "comparison.md", md.str());
    write_text(opt.out / "ood_gap.svg", plot::bar_chart_svg("OOD gap (train - test accuracy)", "gap", bars));
    write_text(opt.out / "attention_gallery.csv", header_done ? gallery.str() : std::string());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  out << md.str();
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"genb: generative bias model ensemble debiasing on a synthetic inverted-prior benchmark"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate train/test splits");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.spec.seed, "Dataset seed");
  gen_cmd->add_option("--num-qtypes", gen.spec.num_qtypes, "Question types T (answers = 2T)");
  gen_cmd->add_option("--objects", gen.spec.objects_per_image, "Objects per image n");
  gen_cmd->add_option("--visual-dim", gen.spec.visual_dim, "Object feature width d_v");
  gen_cmd->add_option("--question-len", gen.spec.question_len, "Question length L");
  gen_cmd->add_option("--vocab-size", gen.spec.vocab_size, "Token vocabulary size");
  gen_cmd->add_option("--distractors", gen.spec.num_distractors, "Distractor table size");
  gen_cmd->add_option("--train-skew", gen.spec.train_skew, "P(answer 2t | qtype t) on train");
  gen_cmd->add_option("--test-skew", gen.spec.test_skew, "P(answer 2t | qtype t) on test");
  gen_cmd->add_option("--train-size", gen.spec.train_size, "Train instances");
  gen_cmd->add_option("--test-size", gen.spec.test_size, "Test instances");
  gen_cmd->add_option("--sigma", gen.spec.signal_noise_sigma, "Feature noise standard deviation");
  gen_cmd->add_flag("--soft-label", gen.spec.soft_label, "Put 0.3 of the label mass on the paired answer");

  TrainOptions tr;
  std::string resume;
  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train target + bias models");
  train_cmd->add_option("--config", config_path, "Key-value config file");
  train_cmd->add_option("--data", tr.data, "Directory with train.narc/test.narc")->required();
  train_cmd->add_option("--out", tr.out, "Run output directory")->required();
  train_cmd->add_option("--set", tr.overrides, "Config override key=value (repeatable)");
  train_cmd->add_option("--resume", resume, "Checkpoint to resume from");
  train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint's target model");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "Directory with train.narc/test.narc")->required();

  AblateOptions ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation grid over seeds");
  ablate_cmd->add_option("--manifest", ab.manifest, "JSON experiment manifest")->required();
  ablate_cmd->add_option("--out", ab.out, "Output directory")->required();
  ablate_cmd->add_option("--jobs", ab.jobs, "Concurrent runs");
  ablate_cmd->add_flag("--quiet", ab.quiet, "Only write files");

  ReportOptions rp;
  auto* report_cmd = app.add_subcommand("report", "Compare finished runs");
  report_cmd->add_option("runs", rp.runs, "Run directories containing report.json")->required();
  report_cmd->add_option("--out", rp.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  if (*gen_cmd) return cmd_gen(gen, std::cout, std::cerr);
  if (*train_cmd) {
    if (!config_path.empty()) tr.config = config_path;
    if (!resume.empty()) tr.resume = resume;
    return cmd_train(tr, std::cout, std::cerr);
  }
  if (*eval_cmd) return cmd_eval(ev, std::cout, std::cerr);
  if (*ablate_cmd) return cmd_ablate(ab, std::cout, std::cerr);
  if (*report_cmd) return cmd_report(rp, std::cout, std::cerr);
  return kUsageError;
}

}  // namespace genb::cli
