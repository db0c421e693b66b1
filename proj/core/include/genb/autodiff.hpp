// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiation over dense double matrices. A Tape
// records one forward computation; `backward` then accumulates gradients
// into every node that depends on a bound parameter.
#pragma once

#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace genb {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

namespace ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

  enum Mode { kGrad, kNoGrad };

  /// In kNoGrad mode `param` binds without gradients and no backward
  /// closures are kept (inference).
  explicit Tape(Mode mode = kGrad) : mode_(mode) { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input that never receives a gradient.
  Var constant(Matrix value);
  /// Trainable leaf referring to external storage. The matrix must outlive
  /// the tape and stay unmodified until `backward` returns. Binding the same
  /// matrix twice returns the same node so gradients accumulate.
  Var param(const Matrix& value);
  /// Gradient-carrying input that owns its value (for input-gradient checks).
  Var input(Matrix value);

  /// Low-level node constructor used by the op library.
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  const Matrix& value(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Seeds d(out)/d(out) = 1 for a 1x1 node and propagates to all ancestors.
  void backward(Var out);

  /// Adds `contribution` to the gradient of node `id` (used by ops).
  void accumulate(int id, const Matrix& contribution);

  /// Gradient w.r.t. a node; zeros of the right shape when none reached it.
  Matrix grad(Var v) const;
  /// Gradient w.r.t. a bound parameter; zeros if the matrix was never bound
  /// or not reached.
  Matrix grad_of(const Matrix& param) const;
  bool is_bound(const Matrix& param) const { return bound_.count(&param) != 0; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;

    const Matrix& value() const { return external ? *external : owned; }
  };

  Mode mode_;
  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, int> bound_;
};

// --- op library -----------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds a 1 x k row to every row of an r x k matrix.
Var add_row(Var a, Var row);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var tanh(Var a);
Var sigmoid(Var a);
/// Elementwise clamp to [lo, hi]; zero gradient where clamped.
Var clamp(Var a, double lo, double hi);
/// Row i of the result is row `indices[i]` of `table` (embedding lookup).
Var gather_rows(Var table, std::span<const int> indices);
/// (B x k) -> (B*n x k); each input row repeated n times consecutively.
Var repeat_rows(Var a, int n);
/// (B*n x 1) -> (B x n) with out(b, j) = a(b*n + j).
Var fold_rows(Var a, int n);
Var softmax_rows(Var a);
// Each row divided by sqrt(|row|^2 + eps).
Var normalize_rows(Var a, double eps = 1e-12);
/// Each column shifted to zero mean and scaled to unit (biased) variance
/// over the rows: (x - mean) / sqrt(var + eps).
Var standardize_cols(Var a, double eps = 1e-5);
/// out(b) = sum_j alpha(b, j) * values(b*n + j) for alpha (B x n), values (B*n x d).
Var weighted_pool(Var alpha, Var values);
/// Scalar sum of all entries of `a` weighted elementwise by a constant.
Var weighted_sum(Var a, const Matrix& weights);
/// Scalar node with externally computed value and gradient w.r.t. `input`.
/// Used to splice closed-form losses into a tape.
Var custom_scalar(Var input, double value, Matrix grad_wrt_input);

}  // namespace ad
}  // namespace genb
