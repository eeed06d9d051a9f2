#include "hsta/autodiff.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>

namespace hsta {
namespace {

constexpr std::array<std::string_view, 15> kOpNames = {
    "constant", "param", "matmul", "matmul_nt", "add", "add_row", "scale",
    "softmax_rows", "layer_norm", "concat_rows", "slice_rows", "gelu", "sum", "weighted_sum", "mse",
};

std::atomic<int> g_fault{-1};

Tape& common_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError("operands recorded on different tapes");
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw ContractError("unbound variable");
  return *a.tape;
}

void accumulate(Tensor& slot, const Tensor& g) { slot.arr() += g.arr(); }

}  // namespace

std::string_view op_name(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<Op> op_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<Op>(i);
  }
  return std::nullopt;
}

void inject_backward_fault(std::optional<Op> op) { g_fault = op ? static_cast<int>(*op) : -1; }

std::optional<Op> backward_fault() {
  const int v = g_fault.load();
  if (v < 0) return std::nullopt;
  return static_cast<Op>(v);
}

const Tensor& Var::value() const {
  if (tape == nullptr) throw ContractError("unbound variable");
  return tape->value(id);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.op = Op::constant;
  node.own = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::param(Param& p) {
  Node node;
  node.op = Op::param;
  node.ref = &p.value;
  node.param = &p;
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.ref ? *node.ref : node.own;
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (node.has_grad) return node.grad;
  return Tensor(value(v.id).shape());
}

Var Tape::record(Op op, Tensor value, BackwardFn fn) {
  Node node;
  node.op = op;
  node.own = std::move(value);
  node.fn = std::move(fn);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Tensor(value(id).shape());
    node.has_grad = true;
  }
  return node.grad;
}

void backward(Tape& tape, Var loss) {
  if (loss.tape != &tape) throw ContractError("loss was not recorded on this tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
  }
  for (auto& node : tape.nodes_) node.has_grad = false;
  tape.grad_slot(loss.id).fill(1.0);

  const auto fault = backward_fault();
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& node = tape.nodes_[i];
    if (!node.has_grad) continue;
    if (node.param) {
      accumulate(node.param->grad, node.grad);
    } else if (node.fn) {
      if (fault && *fault == node.op) node.grad.arr() = -node.grad.arr();
      node.fn(tape, i, node.grad);
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  return t.record(Op::matmul, matmul(a.value(), b.value()),
                  [a = a.id, b = b.id](Tape& tp, std::size_t, const Tensor& g) {
                    accumulate(tp.grad_slot(a), matmul_nt(g, tp.value(b)));
                    accumulate(tp.grad_slot(b), matmul_tn(tp.value(a), g));
                  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = common_tape(a, b);
  return t.record(Op::matmul_nt, matmul_nt(a.value(), b.value()),
                  [a = a.id, b = b.id](Tape& tp, std::size_t, const Tensor& g) {
                    accumulate(tp.grad_slot(a), matmul(g, tp.value(b)));
                    accumulate(tp.grad_slot(b), matmul_tn(g, tp.value(a)));
                  });
}

Var operator+(Var a, Var b) {
  Tape& t = common_tape(a, b);
  if (a.shape() != b.shape()) {
    throw DimensionError("add shape mismatch: " + to_string(a.shape()) + " + " + to_string(b.shape()));
  }
  Tensor y = a.value();
  y.arr() += b.value().arr();
  return t.record(Op::add, std::move(y), [a = a.id, b = b.id](Tape& tp, std::size_t, const Tensor& g) {
    accumulate(tp.grad_slot(a), g);
    accumulate(tp.grad_slot(b), g);
  });
}

Var add_row(Var x, Var bias) {
  Tape& t = common_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 2 || bv.size() != xv.cols()) {
    throw DimensionError("add_row shape mismatch: " + to_string(xv.shape()) + " + " + to_string(bv.shape()));
  }
  Tensor y = xv;
  const std::size_t n = xv.cols();
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    for (std::size_t j = 0; j < n; ++j) y(i, j) += bv[j];
  }
  return t.record(Op::add_row, std::move(y), [x = x.id, b = bias.id](Tape& tp, std::size_t, const Tensor& g) {
    accumulate(tp.grad_slot(x), g);
    Tensor& gb = tp.grad_slot(b);
    const std::size_t cols = g.cols();
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < cols; ++j) gb[j] += g(i, j);
    }
  });
}

Var scale(Var x, double s) {
  Tape& t = tape_of(x);
  Tensor y = x.value();
  y.arr() *= s;
  return t.record(Op::scale, std::move(y), [x = x.id, s](Tape& tp, std::size_t, const Tensor& g) {
    tp.grad_slot(x).arr() += s * g.arr();
  });
}

Var softmax_rows(Var x) {
  Tape& t = tape_of(x);
  return t.record(Op::softmax_rows, softmax_rows(x.value()), [x = x.id](Tape& tp, std::size_t self, const Tensor& g) {
    const Tensor& y = tp.value(self);
    Tensor& gx = tp.grad_slot(x);
    const std::size_t m = y.rows(), n = y.cols();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < n; ++j) gx(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = common_tape(x, gamma);
  common_tape(x, beta);
  return t.record(Op::layer_norm, layer_norm(x.value(), gamma.value(), beta.value(), eps),
                  [x = x.id, gm = gamma.id, bt = beta.id, eps](Tape& tp, std::size_t, const Tensor& g) {
                    const Tensor& xv = tp.value(x);
                    const Tensor& gv = tp.value(gm);
                    const std::size_t m = xv.rows(), d = xv.cols();
                    const double inv_d = 1.0 / static_cast<double>(d);
                    Tensor& gx = tp.grad_slot(x);
                    Tensor& ggamma = tp.grad_slot(gm);
                    Tensor& gbeta = tp.grad_slot(bt);
                    std::vector<double> xhat(d), dxhat(d);
                    for (std::size_t i = 0; i < m; ++i) {
                      double mean = 0.0;
                      for (std::size_t j = 0; j < d; ++j) mean += xv(i, j);
                      mean *= inv_d;
                      double var = 0.0;
                      for (std::size_t j = 0; j < d; ++j) var += (xv(i, j) - mean) * (xv(i, j) - mean);
                      var *= inv_d;
                      const double inv_std = 1.0 / std::sqrt(var + eps);
                      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        xhat[j] = (xv(i, j) - mean) * inv_std;
                        dxhat[j] = g(i, j) * gv[j];
                        ggamma[j] += g(i, j) * xhat[j];
                        gbeta[j] += g(i, j);
                        mean_dxhat += dxhat[j];
                        mean_dxhat_xhat += dxhat[j] * xhat[j];
                      }
                      mean_dxhat *= inv_d;
                      mean_dxhat_xhat *= inv_d;
                      for (std::size_t j = 0; j < d; ++j) {
                        gx(i, j) += inv_std * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                      }
                    }
                  });
}

Var concat_rows(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const std::size_t p = a.value().rows();
  return t.record(Op::concat_rows, concat_rows(a.value(), b.value()),
                  [a = a.id, b = b.id, p](Tape& tp, std::size_t, const Tensor& g) {
                    accumulate(tp.grad_slot(a), slice_rows(g, 0, p));
                    accumulate(tp.grad_slot(b), slice_rows(g, p, g.rows() - p));
                  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(x);
  return t.record(Op::slice_rows, slice_rows(x.value(), begin, count),
                  [x = x.id, begin](Tape& tp, std::size_t, const Tensor& g) {
                    Tensor& gx = tp.grad_slot(x);
                    const std::size_t offset = begin * g.cols();
                    for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
                  });
}

std::pair<Var, Var> split_rows(Var x, std::size_t p) {
  const std::size_t n = x.value().rows();
  if (p > n) throw DimensionError("split_rows at " + std::to_string(p) + " exceeds " + to_string(x.shape()));
  return {slice_rows(x, 0, p), slice_rows(x, p, n - p)};
}

Var gelu(Var x) {
  Tape& t = tape_of(x);
  return t.record(Op::gelu, gelu(x.value()), [x = x.id](Tape& tp, std::size_t, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    Tensor& gx = tp.grad_slot(x);
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      gx[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return t.record(Op::sum, Tensor({1, 1}, {total}), [x = x.id](Tape& tp, std::size_t, const Tensor& g) {
    tp.grad_slot(x).arr() += g[0];
  });
}

Var weighted_sum(Var x, const Tensor& w) {
  Tape& t = tape_of(x);
  if (x.shape() != w.shape()) {
    throw DimensionError("weighted_sum shapes " + to_string(x.shape()) + " and " + to_string(w.shape()));
  }
  const double total = (x.value().arr() * w.arr()).sum();
  return t.record(Op::weighted_sum, Tensor({1, 1}, {total}), [x = x.id, w](Tape& tp, std::size_t, const Tensor& g) {
    tp.grad_slot(x).arr() += g[0] * w.arr();
  });
}

Var mse_loss(Var logits, std::size_t label) {
  Tape& t = tape_of(logits);
  const Tensor& z = logits.value();
  const std::size_t c = z.size();
  if (label >= c) {
    throw ContractError("label " + std::to_string(label) + " out of range for " + std::to_string(c) + " classes");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    const double diff = z[i] - (i == label ? 1.0 : 0.0);
    total += diff * diff;
  }
  total /= static_cast<double>(c);
  return t.record(Op::mse, Tensor({1, 1}, {total}), [z = logits.id, label](Tape& tp, std::size_t, const Tensor& g) {
    const Tensor& zv = tp.value(z);
    Tensor& gz = tp.grad_slot(z);
    const double k = 2.0 / static_cast<double>(zv.size());
    for (std::size_t i = 0; i < zv.size(); ++i) gz[i] += g[0] * k * (zv[i] - (i == label ? 1.0 : 0.0));
  });
}

Tensor finite_diff_grad(const std::function<double()>& f, Param& p, double step) {
  if (!(step > 0.0)) throw ContractError("finite_diff_grad requires step > 0");
  Tensor estimate(p.value.shape());
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double saved = p.value[i];
    p.value[i] = saved + step;
    const double up = f();
    p.value[i] = saved - step;
    const double down = f();
    p.value[i] = saved;
    estimate[i] = (up - down) / (2.0 * step);
  }
  return estimate;
}

double relative_error(const Tensor& analytic, const Tensor& numeric) {
  const double diff = max_abs_diff(analytic, numeric);
  if (analytic.empty()) return 0.0;
  const double scale = std::max(analytic.arr().abs().maxCoeff(), numeric.arr().abs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return diff / scale;
}

}  // namespace hsta
