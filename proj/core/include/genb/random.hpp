// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace genb {

/// Seeded random stream. Independent streams are derived from one run seed
/// by name, and the complete state (engine plus cached normal deviate)
/// round-trips through `serialize`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Stream keyed by (seed, name). Different names give independent streams.
  static Rng derive(std::uint64_t seed, std::string_view name);

  double uniform();                        // [0, 1)
  std::uint64_t below(std::uint64_t n);    // uniform in [0, n)
  double normal();                         // N(0, 1)
  bool bernoulli(double p) { return uniform() < p; }

  /// Matrix of i.i.d. standard normal entries, filled row-major.
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  std::mt19937_64& engine() { return engine_; }

  std::string serialize() const;
  static Rng deserialize(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace genb
