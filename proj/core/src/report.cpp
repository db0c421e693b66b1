// SPDX-License-Identifier: Apache-2.0
#include "genb/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "genb/error.hpp"

namespace genb {
namespace {

using nlohmann::json;

constexpr const char* kQtypeNote =
    "per_qtype accuracies stand in for answer-category columns; qtype t admits answers {2t, 2t+1}";

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_from(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

json metrics_json(const SplitMetrics& m) {
  json per = json::array();
  for (const auto& q : m.per_qtype) per.push_back({{"qtype", q.qtype}, {"count", q.count}, {"accuracy", q.accuracy}});
  return {{"split", split_name(m.split)}, {"count", m.count}, {"accuracy", m.accuracy}, {"per_qtype", per}};
}

SplitMetrics metrics_from(const json& j) {
  SplitMetrics m;
  m.split = parse_split(j.at("split").get<std::string>());
  m.count = j.at("count").get<int>();
  m.accuracy = j.at("accuracy").get<double>();
  for (const auto& q : j.at("per_qtype")) {
    m.per_qtype.push_back({q.at("qtype").get<int>(), q.at("count").get<int>(), q.at("accuracy").get<double>()});
  }
  return m;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number_or_null(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number_from(j.at(r).at(c));
  }
  return m;
}

json vector_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

std::vector<double> vector_from(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(number_from(x));
  return v;
}

}  // namespace

SplitStatistics split_statistics(const SplitBundle& bundle) {
  PriorTable table = prior_table(bundle);
  SplitStatistics s;
  s.split = bundle.split;
  s.count = static_cast<int>(bundle.size());
  s.qtype_counts = table.counts;
  s.prior = table.probs;
  return s;
}

std::string report_to_json(const RunReport& r) {
  json j;
  j["schema"] = kReportSchema;
  j["status"] = r.status;
  j["qtype_columns"] = kQtypeNote;
  j["seed"] = r.seed;
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  j["config"] = r.config;
  j["dataset"] = r.dataset;
  json stats = json::array();
  for (const auto& s : r.split_stats) {
    stats.push_back({{"split", split_name(s.split)},
                     {"count", s.count},
                     {"qtype_counts", s.qtype_counts},
                     {"prior", matrix_json(s.prior)}});
  }
  j["split_stats"] = stats;
  json metrics = json::object();
  if (r.train) metrics["train"] = metrics_json(*r.train);
  if (r.test) metrics["test"] = metrics_json(*r.test);
  j["metrics"] = metrics;
  j["ood_gap"] = r.ood_gap ? json(*r.ood_gap) : json(nullptr);
  if (r.bias) {
    j["bias_model"] = {{"prior_tv", vector_json(r.bias->prior_tv)},
                       {"prior_kl", vector_json(r.bias->prior_kl)},
                       {"mean_prior_tv", number_or_null(r.bias->mean_prior_tv)},
                       {"test_accuracy_noise", r.bias->test_accuracy_noise},
                       {"test_accuracy_real", r.bias->test_accuracy_real},
                       {"attention_dispersion", r.bias->attention_dispersion}};
  } else {
    j["bias_model"] = nullptr;
  }
  json hist = json::array();
  for (const auto& h : r.history) {
    hist.push_back({{"epoch", h.epoch},
                    {"step", h.step},
                    {"train_accuracy", h.train_accuracy},
                    {"test_accuracy", h.test_accuracy}});
  }
  j["history"] = hist;
  return j.dump(2);
}

RunReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError("json", std::string("report is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("schema") || j["schema"] != kReportSchema) {
    throw FormatError("schema", std::string("report schema is not '") + kReportSchema + "'");
  }
  RunReport r;
  try {
    r.status = j.at("status").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    r.config = j.at("config").get<KeyValues>();
    r.dataset = j.at("dataset").get<KeyValues>();
    for (const auto& s : j.at("split_stats")) {
      SplitStatistics st;
      st.split = parse_split(s.at("split").get<std::string>());
      st.count = s.at("count").get<int>();
      st.qtype_counts = s.at("qtype_counts").get<std::vector<int>>();
      st.prior = matrix_from(s.at("prior"));
      r.split_stats.push_back(std::move(st));
    }
    const json& m = j.at("metrics");
    if (m.contains("train")) r.train = metrics_from(m["train"]);
    if (m.contains("test")) r.test = metrics_from(m["test"]);
    if (!j.at("ood_gap").is_null()) r.ood_gap = j["ood_gap"].get<double>();
    if (!j.at("bias_model").is_null()) {
      const json& b = j["bias_model"];
      BiasDiagnostics d;
      d.prior_tv = vector_from(b.at("prior_tv"));
      d.prior_kl = vector_from(b.at("prior_kl"));
      d.mean_prior_tv = number_from(b.at("mean_prior_tv"));
      d.test_accuracy_noise = b.at("test_accuracy_noise").get<double>();
      d.test_accuracy_real = b.at("test_accuracy_real").get<double>();
      d.attention_dispersion = b.at("attention_dispersion").get<double>();
      r.bias = d;
    }
    for (const auto& h : j.at("history")) {
      r.history.push_back({h.at("epoch").get<int>(), h.at("step").get<long long>(), h.at("train_accuracy").get<double>(),
                           h.at("test_accuracy").get<double>()});
    }
  } catch (const json::exception& e) {
    throw FormatError("report", std::string("malformed report: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError("report", std::string("malformed report: ") + e.what());
  }
  return r;
}

void write_report(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write report '" + path.string() + "'");
  os << report_to_json(report) << '\n';
}

RunReport read_report(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError(path.string(), "missing report file '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return report_from_json(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string(), path.string() + ": " + e.what());
  }
}

std::string per_qtype_csv(const RunReport& report) {
  std::ostringstream os;
  os << "split,qtype,count,accuracy\n";
  for (const auto* m : {report.train ? &*report.train : nullptr, report.test ? &*report.test : nullptr}) {
    if (!m) continue;
    for (const auto& q : m->per_qtype) os << split_name(m->split) << ',' << q.qtype << ',' << q.count << ',' << q.accuracy << '\n';
  }
  return os.str();
}

}  // namespace genb
