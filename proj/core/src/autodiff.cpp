// SPDX-License-Identifier: Apache-2.0
#include "genb/autodiff.hpp"

#include <cmath>
#include <string>

#include "genb/error.hpp"

namespace genb::ad {
namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError("autodiff: vars belong to different tapes");
}

void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw ContractError(std::string("autodiff ") + op + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()) + ")");
  }
}

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) {
  Node node;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const Matrix& value) {
  if (auto it = bound_.find(&value); it != bound_.end()) return Var{this, it->second};
  Node node;
  node.external = &value;
  node.requires_grad = mode_ == kGrad;
  nodes_.push_back(std::move(node));
  int id = static_cast<int>(nodes_.size()) - 1;
  bound_[&value] = id;
  return Var{this, id};
}

Var Tape::input(Matrix value) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = mode_ == kGrad;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  Node node;
  node.owned = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape != this) throw ContractError("autodiff: input recorded on a different tape");
    node.requires_grad = node.requires_grad || requires_grad(in.id);
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value(); }

void Tape::accumulate(int id, const Matrix& contribution) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = contribution;
  } else {
    node.grad += contribution;
  }
}

void Tape::backward(Var out) {
  if (out.tape != this) throw ContractError("autodiff: backward on foreign var");
  const Matrix& v = value(out.id);
  if (v.rows() != 1 || v.cols() != 1) throw ContractError("autodiff: backward requires a scalar output");
  accumulate(out.id, Matrix::Ones(1, 1));
  for (int id = out.id; id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.requires_grad || !node.backward || node.grad.size() == 0) continue;
    // Copy: the callback may grow nodes_ (it never does today, but accumulate
    // must not alias the upstream buffer).
    Matrix upstream = node.grad;
    node.backward(*this, upstream);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& node = nodes_.at(static_cast<std::size_t>(v.id));
  if (node.grad.size() == 0) return Matrix::Zero(node.value().rows(), node.value().cols());
  return node.grad;
}

Matrix Tape::grad_of(const Matrix& param) const {
  auto it = bound_.find(&param);
  if (it == bound_.end()) return Matrix::Zero(param.rows(), param.cols());
  return grad(Var{const_cast<Tape*>(this), it->second});
}

// --- ops --------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_shape(av.cols() == bv.rows(), "matmul", av, bv);
  Var in[] = {a, b};
  return a.tape->record(av * bv, in, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a.id)) t.accumulate(a.id, g * t.value(b.id).transpose());
    if (t.requires_grad(b.id)) t.accumulate(b.id, t.value(a.id).transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.value(), b.value());
  Var in[] = {a, b};
  return a.tape->record(a.value() + b.value(), in, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a.value(), b.value());
  Var in[] = {a, b};
  return a.tape->record(a.value() - b.value(), in, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, -g);
  });
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row);
  require_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row", a.value(), row.value());
  Var in[] = {a, row};
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape->record(std::move(out), in, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a.id, g);
    if (t.requires_grad(row.id)) t.accumulate(row.id, g.colwise().sum());
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul", a.value(), b.value());
  Var in[] = {a, b};
  return a.tape->record(a.value().cwiseProduct(b.value()), in, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a.id)) t.accumulate(a.id, g.cwiseProduct(t.value(b.id)));
    if (t.requires_grad(b.id)) t.accumulate(b.id, g.cwiseProduct(t.value(a.id)));
  });
}

Var scale(Var a, double s) {
  Var in[] = {a};
  return a.tape->record(a.value() * s, in, [a, s](Tape& t, const Matrix& g) { t.accumulate(a.id, g * s); });
}

Var relu(Var a) {
  Var in[] = {a};
  return a.tape->record(a.value().cwiseMax(0.0), in, [a](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(a.id);
    t.accumulate(a.id, (x.array() > 0.0).select(g, 0.0));
  });
}

Var leaky_relu(Var a, double slope) {
  Var in[] = {a};
  const Matrix& x = a.value();
  Matrix out = (x.array() > 0.0).select(x, x * slope);
  return a.tape->record(std::move(out), in, [a, slope](Tape& t, const Matrix& g) {
    const Matrix& xv = t.value(a.id);
    t.accumulate(a.id, (xv.array() > 0.0).select(g, g * slope));
  });
}

Var tanh(Var a) {
  Var in[] = {a};
  return a.tape->record(a.value().array().tanh().matrix(), in, [a](Tape& t, const Matrix& g) {
    Eigen::ArrayXXd y = t.value(a.id).array().tanh();
    t.accumulate(a.id, (g.array() * (1.0 - y.square())).matrix());
  });
}

Var sigmoid(Var a) {
  Var in[] = {a};
  auto logistic = [](const Matrix& x) -> Eigen::ArrayXXd { return 1.0 / (1.0 + (-x.array()).exp()); };
  return a.tape->record(logistic(a.value()).matrix(), in, [a, logistic](Tape& t, const Matrix& g) {
    Eigen::ArrayXXd s = logistic(t.value(a.id));
    t.accumulate(a.id, (g.array() * s * (1.0 - s)).matrix());
  });
}

Var clamp(Var a, double lo, double hi) {
  Var in[] = {a};
  return a.tape->record(a.value().cwiseMax(lo).cwiseMin(hi), in, [a, lo, hi](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(a.id);
    t.accumulate(a.id, (x.array() >= lo && x.array() <= hi).select(g, 0.0));
  });
}

Var gather_rows(Var table, std::span<const int> indices) {
  const Matrix& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(indices.size()), tv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    int r = indices[i];
    if (r < 0 || r >= tv.rows()) throw ContractError("gather_rows: index " + std::to_string(r) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = tv.row(r);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  Var in[] = {table};
  return table.tape->record(std::move(out), in, [table, idx = std::move(idx)](Tape& t, const Matrix& g) {
    const Matrix& tv2 = t.value(table.id);
    Matrix acc = Matrix::Zero(tv2.rows(), tv2.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) acc.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(table.id, acc);
  });
}

Var repeat_rows(Var a, int n) {
  if (n <= 0) throw ContractError("repeat_rows: n must be positive");
  const Matrix& av = a.value();
  Matrix out(av.rows() * n, av.cols());
  for (Eigen::Index b = 0; b < av.rows(); ++b) {
    for (int j = 0; j < n; ++j) out.row(b * n + j) = av.row(b);
  }
  Var in[] = {a};
  return a.tape->record(std::move(out), in, [a, n](Tape& t, const Matrix& g) {
    Eigen::Index rows = g.rows() / n;
    Matrix acc = Matrix::Zero(rows, g.cols());
    for (Eigen::Index b = 0; b < rows; ++b) {
      for (int j = 0; j < n; ++j) acc.row(b) += g.row(b * n + j);
    }
    t.accumulate(a.id, acc);
  });
}

Var fold_rows(Var a, int n) {
  const Matrix& av = a.value();
  if (n <= 0 || av.cols() != 1 || av.rows() % n != 0) throw ContractError("fold_rows: expected (B*n x 1) input");
  Eigen::Index batch = av.rows() / n;
  Matrix out(batch, n);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int j = 0; j < n; ++j) out(b, j) = av(b * n + j, 0);
  }
  Var in[] = {a};
  return a.tape->record(std::move(out), in, [a, n](Tape& t, const Matrix& g) {
    Matrix acc(g.rows() * n, 1);
    for (Eigen::Index b = 0; b < g.rows(); ++b) {
      for (int j = 0; j < n; ++j) acc(b * n + j, 0) = g(b, j);
    }
    t.accumulate(a.id, acc);
  });
}

namespace {

Matrix softmax_rows_value(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    RowVector e = (x.row(r).array() - m).exp().matrix();
    out.row(r) = e / e.sum();
  }
  return out;
}

}  // namespace

Var softmax_rows(Var a) {
  Var in[] = {a};
  return a.tape->record(softmax_rows_value(a.value()), in, [a](Tape& t, const Matrix& g) {
    Matrix p = softmax_rows_value(t.value(a.id));
    // d x_j = p_j * (g_j - sum_k g_k p_k)
    Eigen::VectorXd inner = g.cwiseProduct(p).rowwise().sum();
    Matrix dx = p.cwiseProduct(g.colwise() - inner);
    t.accumulate(a.id, dx);
  });
}

Var normalize_rows(Var a, double eps) {
  const Matrix& x = a.value();
  Eigen::VectorXd norm = (x.rowwise().squaredNorm().array() + eps).sqrt();
  Matrix out = x.array().colwise() / norm.array();
  Var in[] = {a};
  return a.tape->record(std::move(out), in, [a, eps](Tape& t, const Matrix& g) {
    const Matrix& x2 = t.value(a.id);
    Eigen::VectorXd s = (x2.rowwise().squaredNorm().array() + eps).sqrt();
    Eigen::VectorXd dot = x2.cwiseProduct(g).rowwise().sum();
    Eigen::VectorXd s3 = s.array().cube();
    Matrix dx = g.array().colwise() / s.array() - x2.array().colwise() * (dot.array() / s3.array());
    t.accumulate(a.id, dx);
  });
}

Var standardize_cols(Var a, double eps) {
  const Matrix& x = a.value();
  const double rows = static_cast<double>(x.rows());
  RowVector mean = x.colwise().mean();
  Matrix centered = x.rowwise() - mean;
  RowVector inv_sd = ((centered.array().square().colwise().sum() / rows) + eps).sqrt().inverse();
  Matrix out = centered.array().rowwise() * inv_sd.array();
  Var in[] = {a};
  return a.tape->record(out, in, [a, out, inv_sd, rows](Tape& t, const Matrix& g) {
    RowVector g_mean = g.colwise().mean();
    RowVector gy_mean = g.cwiseProduct(out).colwise().sum() / rows;
    Matrix dx = ((g.rowwise() - g_mean).array() - out.array().rowwise() * gy_mean.array()).rowwise() * inv_sd.array();
    t.accumulate(a.id, dx);
  });
}

Var weighted_pool(Var alpha, Var values) {
  require_same_tape(alpha, values);
  const Matrix& al = alpha.value();
  const Matrix& vv = values.value();
  const Eigen::Index batch = al.rows();
  const Eigen::Index n = al.cols();
  require_shape(vv.rows() == batch * n, "weighted_pool", al, vv);
  Matrix out = Matrix::Zero(batch, vv.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index j = 0; j < n; ++j) out.row(b) += al(b, j) * vv.row(b * n + j);
  }
  Var in[] = {alpha, values};
  return alpha.tape->record(std::move(out), in, [alpha, values](Tape& t, const Matrix& g) {
    const Matrix& al2 = t.value(alpha.id);
    const Matrix& vv2 = t.value(values.id);
    const Eigen::Index nb = al2.rows();
    const Eigen::Index nn = al2.cols();
    if (t.requires_grad(alpha.id)) {
      Matrix da(nb, nn);
      for (Eigen::Index b = 0; b < nb; ++b) {
        for (Eigen::Index j = 0; j < nn; ++j) da(b, j) = g.row(b).dot(vv2.row(b * nn + j));
      }
      t.accumulate(alpha.id, da);
    }
    if (t.requires_grad(values.id)) {
      Matrix dv(vv2.rows(), vv2.cols());
      for (Eigen::Index b = 0; b < nb; ++b) {
        for (Eigen::Index j = 0; j < nn; ++j) dv.row(b * nn + j) = al2(b, j) * g.row(b);
      }
      t.accumulate(values.id, dv);
    }
  });
}

Var weighted_sum(Var a, const Matrix& weights) {
  require_shape(a.rows() == weights.rows() && a.cols() == weights.cols(), "weighted_sum", a.value(), weights);
  Var in[] = {a};
  Matrix out(1, 1);
  out(0, 0) = a.value().cwiseProduct(weights).sum();
  return a.tape->record(std::move(out), in,
                        [a, weights](Tape& t, const Matrix& g) { t.accumulate(a.id, weights * g(0, 0)); });
}

Var custom_scalar(Var input, double value, Matrix grad_wrt_input) {
  require_shape(input.rows() == grad_wrt_input.rows() && input.cols() == grad_wrt_input.cols(), "custom_scalar",
                input.value(), grad_wrt_input);
  Var in[] = {input};
  Matrix out(1, 1);
  out(0, 0) = value;
  return input.tape->record(std::move(out), in, [input, grad = std::move(grad_wrt_input)](Tape& t, const Matrix& g) {
    t.accumulate(input.id, grad * g(0, 0));
  });
}

}  // namespace genb::ad
