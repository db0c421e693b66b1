// SPDX-License-Identifier: Apache-2.0
#include "genb/optim.hpp"

#include <cmath>
#include <vector>

#include "genb/error.hpp"

namespace genb {
namespace {

std::vector<double> to_row_major(const Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  }
  return out;
}

Matrix from_row_major(const std::vector<double>& data, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

}  // namespace

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam|sgd)");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }

void Optimizer::update(const std::string& key, Matrix& param, const Matrix& grad) {
  if (cfg_.kind == OptimizerKind::kSgd) {
    param.noalias() -= cfg_.lr * grad;
    return;
  }
  auto [it, fresh] = moments_.try_emplace(key);
  Moments& mo = it->second;
  if (fresh) {
    mo.m = Matrix::Zero(param.rows(), param.cols());
    mo.v = Matrix::Zero(param.rows(), param.cols());
  }
  mo.m = cfg_.beta1 * mo.m + (1.0 - cfg_.beta1) * grad;
  mo.v = cfg_.beta2 * mo.v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  param.array() -= cfg_.lr * (mo.m.array() / c1) / ((mo.v.array() / c2).sqrt() + cfg_.eps);
}

void Optimizer::save(Archive& ar, const std::string& group) const {
  ar.set_meta("optim." + group + ".steps", std::to_string(t_));
  for (const auto& [key, mo] : moments_) {
    auto m = to_row_major(mo.m);
    auto v = to_row_major(mo.v);
    ar.put("optim." + group + "." + key + ".m", {mo.m.rows(), mo.m.cols()}, std::span<const double>(m));
    ar.put("optim." + group + "." + key + ".v", {mo.v.rows(), mo.v.cols()}, std::span<const double>(v));
  }
}

void Optimizer::load(const Archive& ar, const std::string& group) {
  const std::string prefix = "optim." + group + ".";
  t_ = std::stoll(ar.meta(prefix + "steps"));
  moments_.clear();
  for (const auto& [name, arr] : ar.arrays()) {
    if (name.rfind(prefix, 0) != 0 || name.size() < prefix.size() + 2 || name.compare(name.size() - 2, 2, ".m") != 0) {
      continue;
    }
    std::string key = name.substr(prefix.size(), name.size() - prefix.size() - 2);
    if (arr.shape.size() != 2) throw FormatError(name, "optimizer moment '" + name + "' must be rank 2");
    Moments mo;
    mo.m = from_row_major(ar.get_f64(name), arr.shape[0], arr.shape[1]);
    mo.v = from_row_major(ar.get_f64(prefix + key + ".v", arr.shape), arr.shape[0], arr.shape[1]);
    moments_[key] = std::move(mo);
  }
}

bool operator==(const Optimizer& a, const Optimizer& b) {
  if (a.t_ != b.t_ || a.moments_.size() != b.moments_.size()) return false;
  for (const auto& [k, mo] : a.moments_) {
    auto it = b.moments_.find(k);
    if (it == b.moments_.end() || mo.m != it->second.m || mo.v != it->second.v) return false;
  }
  return true;
}

}  // namespace genb
