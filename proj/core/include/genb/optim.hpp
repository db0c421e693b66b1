// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "genb/archive.hpp"
#include "genb/autodiff.hpp"

namespace genb {

enum class OptimizerKind { kAdam, kSgd };

OptimizerKind parse_optimizer(const std::string& s);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First-order optimizer for one parameter group. Moments are keyed by the
/// parameter's dotted name so the state survives moves of the owning model.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  /// One update of every parameter of `net` from the gradients on `tape`.
  template <typename Net>
  void step(Net& net, const std::string& prefix, const ad::Tape& tape) {
    ++t_;
    net.for_each_param([&](const char* name, Matrix& param) { update(prefix + name, param, tape.grad_of(param)); });
  }

  std::int64_t steps() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

  /// Stores moments as "optim.<group>.<name>.m|v" and the step count as metadata.
  void save(Archive& ar, const std::string& group) const;
  void load(const Archive& ar, const std::string& group);

  friend bool operator==(const Optimizer& a, const Optimizer& b);

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };

  void update(const std::string& key, Matrix& param, const Matrix& grad);

  OptimizerConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace genb
