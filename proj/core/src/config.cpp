// SPDX-License-Identifier: Apache-2.0
#include "genb/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "genb/error.hpp"

namespace genb {
namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "' expects true|false, got '" + v + "'");
}

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"epochs", [](TrainConfig& c, auto& k, auto& v) { c.epochs = to_int(k, v); }},
      {"batch_size", [](TrainConfig& c, auto& k, auto& v) { c.batch_size = to_int(k, v); }},
      {"optimizer", [](TrainConfig& c, auto&, auto& v) { c.optimizer = parse_optimizer(v); }},
      {"lr_target", [](TrainConfig& c, auto& k, auto& v) { c.lr_target = to_double(k, v); }},
      {"lr_bias", [](TrainConfig& c, auto& k, auto& v) { c.lr_bias = to_double(k, v); }},
      {"lr_discriminator", [](TrainConfig& c, auto& k, auto& v) { c.lr_discriminator = to_double(k, v); }},
      {"lambda_distill", [](TrainConfig& c, auto& k, auto& v) { c.weights.distill = to_double(k, v); }},
      {"lambda_gt", [](TrainConfig& c, auto& k, auto& v) { c.weights.gt = to_double(k, v); }},
      {"use_gan", [](TrainConfig& c, auto& k, auto& v) { c.weights.use_gan = to_bool(k, v); }},
      {"use_distill", [](TrainConfig& c, auto& k, auto& v) { c.weights.use_distill = to_bool(k, v); }},
      {"use_gt", [](TrainConfig& c, auto& k, auto& v) { c.weights.use_gt = to_bool(k, v); }},
      {"kl_mode", [](TrainConfig& c, auto&, auto& v) { c.kl_mode = parse_kl_mode(v); }},
      {"generator_loss", [](TrainConfig& c, auto&, auto& v) { c.generator_loss = parse_generator_loss(v); }},
      {"debias_loss", [](TrainConfig& c, auto&, auto& v) { c.debias_loss = parse_debias_variant(v); }},
      {"bias_model", [](TrainConfig& c, auto&, auto& v) { c.bias_model = parse_bias_model_variant(v); }},
      {"d_steps_per_batch", [](TrainConfig& c, auto& k, auto& v) { c.d_steps_per_batch = to_int(k, v); }},
      {"seed", [](TrainConfig& c, auto& k, auto& v) { c.seed = to_u64(k, v); }},
      {"deterministic", [](TrainConfig& c, auto& k, auto& v) { c.deterministic = to_bool(k, v); }},
      {"checkpoint_every", [](TrainConfig& c, auto& k, auto& v) { c.checkpoint_every = to_int(k, v); }},
      {"eval_every", [](TrainConfig& c, auto& k, auto& v) { c.eval_every = to_int(k, v); }},
      {"question_dim", [](TrainConfig& c, auto& k, auto& v) { c.question_dim = to_int(k, v); }},
      {"hidden_dim", [](TrainConfig& c, auto& k, auto& v) { c.hidden_dim = to_int(k, v); }},
      {"noise_dim", [](TrainConfig& c, auto& k, auto& v) { c.noise_dim = to_int(k, v); }},
      {"disc_hidden", [](TrainConfig& c, auto& k, auto& v) { c.disc_hidden = to_int(k, v); }},
      {"generator_batch_norm", [](TrainConfig& c, auto& k, auto& v) { c.generator_batch_norm = to_bool(k, v); }},
      {"generator_unit_rows", [](TrainConfig& c, auto& k, auto& v) { c.generator_unit_rows = to_bool(k, v); }},
      {"prior_noise_draws", [](TrainConfig& c, auto& k, auto& v) { c.prior_noise_draws = to_int(k, v); }},
      {"attention_instances", [](TrainConfig& c, auto& k, auto& v) { c.attention_instances = to_int(k, v); }},
      {"attention_draws", [](TrainConfig& c, auto& k, auto& v) { c.attention_draws = to_int(k, v); }},
  };
  return table;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream is(text);
  int line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string to_string(BiasModelVariant v) { return v == BiasModelVariant::kGenB ? "genb" : "vanilla"; }

BiasModelVariant parse_bias_model_variant(const std::string& s) {
  if (s == "genb") return BiasModelVariant::kGenB;
  if (s == "vanilla") return BiasModelVariant::kVanilla;
  throw ConfigError("unknown bias_model '" + s + "' (expected genb|vanilla)");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("invalid train config: ") + msg);
  };
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size > 0, "batch_size must be positive");
  require(lr_target > 0 && lr_bias > 0 && lr_discriminator > 0, "learning rates must be positive");
  weights.validate();
  require(d_steps_per_batch >= 1, "d_steps_per_batch must be >= 1");
  require(checkpoint_every >= 0 && eval_every >= 0, "cadences must be >= 0");
  require(question_dim > 0 && hidden_dim > 0 && noise_dim > 0 && disc_hidden > 0, "network widths must be positive");
  require(prior_noise_draws >= 100, "prior_noise_draws must be >= 100");
  require(attention_instances >= 0, "attention_instances must be >= 0");
  require(attention_draws >= 2, "attention_draws must be >= 2");
}

KeyValues TrainConfig::to_kv() const {
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"optimizer", to_string(optimizer)},
      {"lr_target", fmt_double(lr_target)},
      {"lr_bias", fmt_double(lr_bias)},
      {"lr_discriminator", fmt_double(lr_discriminator)},
      {"lambda_distill", fmt_double(weights.distill)},
      {"lambda_gt", fmt_double(weights.gt)},
      {"use_gan", b(weights.use_gan)},
      {"use_distill", b(weights.use_distill)},
      {"use_gt", b(weights.use_gt)},
      {"kl_mode", to_string(kl_mode)},
      {"generator_loss", to_string(generator_loss)},
      {"debias_loss", to_string(debias_loss)},
      {"bias_model", to_string(bias_model)},
      {"d_steps_per_batch", std::to_string(d_steps_per_batch)},
      {"seed", std::to_string(seed)},
      {"deterministic", b(deterministic)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"eval_every", std::to_string(eval_every)},
      {"question_dim", std::to_string(question_dim)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"noise_dim", std::to_string(noise_dim)},
      {"disc_hidden", std::to_string(disc_hidden)},
      {"generator_batch_norm", b(generator_batch_norm)},
      {"generator_unit_rows", b(generator_unit_rows)},
      {"prior_noise_draws", std::to_string(prior_noise_draws)},
      {"attention_instances", std::to_string(attention_instances)},
      {"attention_draws", std::to_string(attention_draws)},
  };
}

TrainConfig TrainConfig::with(const KeyValues& kv) const {
  TrainConfig c = *this;
  for (const auto& [k, v] : kv) {
    auto it = setters().find(k);
    if (it == setters().end()) throw ConfigError("unknown config key '" + k + "'");
    it->second(c, k, v);
  }
  return c;
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) { return TrainConfig{}.with(kv); }

TrainConfig load_train_config(const std::filesystem::path& path) {
  TrainConfig c = TrainConfig::from_kv(load_key_values(path));
  c.validate();
  return c;
}

}  // namespace genb
