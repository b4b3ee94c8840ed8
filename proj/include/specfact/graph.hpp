// specfact/graph.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiation over an append-only operation tape.
// Nodes reference strictly earlier nodes, so construction order is a
// topological order and the backward pass is a single reverse sweep.
// Values are computed eagerly at construction and cached; forward() rebinds
// inputs / re-reads parameters and recomputes the whole tape.

#ifndef SPECFACT_GRAPH_HPP
#define SPECFACT_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "specfact/common.hpp"
#include "specfact/rng.hpp"
#include "specfact/tensor.hpp"

namespace specfact {

using NodeId = int32_t;
using NamedTensors = std::map<std::string, Tensor>;

// Named set of trainable tensors, shared between graphs and the optimizer.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value) {
    if (values_.count(name)) throw_validation("ParamStore: duplicate parameter '", name, "'");
    values_.emplace(name, std::move(value));
  }

  bool has(const std::string& name) const { return values_.count(name) > 0; }

  const Tensor& at(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw_validation("ParamStore: unknown parameter '", name, "'");
    return it->second;
  }

  Tensor& at_mut(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw_validation("ParamStore: unknown parameter '", name, "'");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
  }

  size_t size() const { return values_.size(); }

  const std::map<std::string, Tensor>& map() const { return values_; }
  std::map<std::string, Tensor>& map_mut() { return values_; }

 private:
  std::map<std::string, Tensor> values_;
};

enum class Op : uint8_t {
  kConstant,
  kInput,
  kParam,
  kMatMul,
  kTranspose,
  kAdd,
  kMul,
  kScale,
  kRelu,
  kLogistic,
  kTanh,
  kExp,
  kLog,
  kConcat,
  kSlice,
  kReshape,
  kGatherRows,
  kGatherCols,
  kLogSumExp,
  kLogAddExp,
  kLogSoftmax,
  kSoftmaxXent,
  kMse,
  kDot,
  kSum,
  kGradReverse,
  kStopGradient,
  kDropout,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kRelu: return "relu";
    case Op::kLogistic: return "logistic";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kReshape: return "reshape";
    case Op::kGatherRows: return "gather_rows";
    case Op::kGatherCols: return "gather_cols";
    case Op::kLogSumExp: return "logsumexp";
    case Op::kLogAddExp: return "logaddexp";
    case Op::kLogSoftmax: return "log_softmax";
    case Op::kSoftmaxXent: return "softmax_xent";
    case Op::kMse: return "mse";
    case Op::kDot: return "dot";
    case Op::kSum: return "sum";
    case Op::kGradReverse: return "grad_reverse";
    case Op::kStopGradient: return "stop_gradient";
    case Op::kDropout: return "dropout";
  }
  return "?";
}

// Per-parameter comparison of analytic gradients against central finite
// differences. Relative error uses max(1, |fd|, |analytic|) in the
// denominator, appropriate for O(1) losses.
struct GradReport {
  struct Entry {
    std::string param;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
  };
  std::vector<Entry> entries;
  double eps = 0.0;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }
};

class Graph {
 public:
  explicit Graph(ParamStore* params = nullptr) : params_(params) {}

  // ---- leaves ----

  NodeId constant(Tensor value, std::string name = "") {
    Node n;
    n.op = Op::kConstant;
    n.value = std::move(value);
    n.name = std::move(name);
    return push(std::move(n));
  }

  NodeId input(const std::string& name, Tensor initial) {
    if (input_ids_.count(name)) throw_validation("Graph: duplicate input '", name, "'");
    Node n;
    n.op = Op::kInput;
    n.value = std::move(initial);
    n.name = name;
    NodeId id = push(std::move(n));
    input_ids_[name] = id;
    return id;
  }

  // References a ParamStore entry; one node per name, fan-out shares it.
  NodeId param(const std::string& name) {
    if (params_ == nullptr) throw_validation("Graph: no ParamStore attached, cannot use '", name, "'");
    auto it = param_ids_.find(name);
    if (it != param_ids_.end()) return it->second;
    Node n;
    n.op = Op::kParam;
    n.value = params_->at(name);
    n.name = name;
    NodeId id = push(std::move(n));
    param_ids_[name] = id;
    return id;
  }

  // ---- operations ----

  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(0)) {
      fail_shape("matmul", {a, b});
    }
    Node n = make(Op::kMatMul, {a, b});
    return push_compute(std::move(n));
  }

  NodeId transpose(NodeId a) {
    if (val(a).rank() != 2) fail_shape("transpose", {a});
    Node n = make(Op::kTranspose, {a});
    return push_compute(std::move(n));
  }

  // Elementwise add; also accepts rank-1 b broadcast across the rows of a
  // rank-2 a (bias addition).
  NodeId add(NodeId a, NodeId b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    bool same = ta.same_shape(tb);
    bool rowb = ta.rank() == 2 && tb.rank() == 1 && ta.dim(1) == tb.dim(0);
    if (!same && !rowb) fail_shape("add", {a, b});
    Node n = make(Op::kAdd, {a, b});
    return push_compute(std::move(n));
  }

  NodeId mul(NodeId a, NodeId b) {
    if (!val(a).same_shape(val(b))) fail_shape("mul", {a, b});
    Node n = make(Op::kMul, {a, b});
    return push_compute(std::move(n));
  }

  NodeId scale(NodeId a, double c) {
    Node n = make(Op::kScale, {a});
    n.scalar = c;
    return push_compute(std::move(n));
  }

  NodeId relu(NodeId a) { return push_compute(make(Op::kRelu, {a})); }
  NodeId logistic(NodeId a) { return push_compute(make(Op::kLogistic, {a})); }
  NodeId tanh(NodeId a) { return push_compute(make(Op::kTanh, {a})); }
  NodeId exp(NodeId a) { return push_compute(make(Op::kExp, {a})); }
  NodeId log(NodeId a) { return push_compute(make(Op::kLog, {a})); }

  NodeId concat(const std::vector<NodeId>& parts, int axis) {
    if (parts.empty()) throw_validation("concat: no inputs");
    const Tensor& t0 = val(parts[0]);
    if (axis < 0 || axis >= t0.rank()) fail_shape("concat", parts);
    for (NodeId p : parts) {
      const Tensor& t = val(p);
      if (t.rank() != t0.rank()) fail_shape("concat", parts);
      for (int d = 0; d < t0.rank(); ++d) {
        if (d != axis && t.dim(d) != t0.dim(d)) fail_shape("concat", parts);
      }
    }
    Node n = make(Op::kConcat, parts);
    n.ints = {axis};
    return push_compute(std::move(n));
  }

  NodeId slice(NodeId a, int axis, int64_t start, int64_t stop) {
    const Tensor& t = val(a);
    if (axis < 0 || axis >= t.rank() || start < 0 || stop <= start || stop > t.dim(axis)) {
      fail_shape("slice", {a});
    }
    Node n = make(Op::kSlice, {a});
    n.ints = {axis, start, stop};
    return push_compute(std::move(n));
  }

  NodeId reshape(NodeId a, Shape dims) {
    if (shape_numel(dims) != val(a).numel()) fail_shape("reshape", {a});
    Node n = make(Op::kReshape, {a});
    n.ints.assign(dims.begin(), dims.end());
    return push_compute(std::move(n));
  }

  NodeId gather_rows(NodeId a, const std::vector<int64_t>& rows) {
    const Tensor& t = val(a);
    if (t.rank() != 2 || rows.empty()) fail_shape("gather_rows", {a});
    for (int64_t r : rows) {
      if (r < 0 || r >= t.dim(0)) fail_shape("gather_rows", {a});
    }
    Node n = make(Op::kGatherRows, {a});
    n.ints = rows;
    return push_compute(std::move(n));
  }

  NodeId gather_cols(NodeId a, const std::vector<int64_t>& cols) {
    const Tensor& t = val(a);
    if (t.rank() != 2 || cols.empty()) fail_shape("gather_cols", {a});
    for (int64_t c : cols) {
      if (c < 0 || c >= t.dim(1)) fail_shape("gather_cols", {a});
    }
    Node n = make(Op::kGatherCols, {a});
    n.ints = cols;
    return push_compute(std::move(n));
  }

  // Reduces the last axis: [.., K] -> [..]; rank-1 input yields a scalar.
  NodeId logsumexp(NodeId a) {
    if (val(a).rank() < 1) fail_shape("logsumexp", {a});
    return push_compute(make(Op::kLogSumExp, {a}));
  }

  // Elementwise log(sum_i exp(x_i)) over same-shaped inputs.
  NodeId logaddexp(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw_validation("logaddexp: no inputs");
    for (NodeId p : parts) {
      if (!val(p).same_shape(val(parts[0]))) fail_shape("logaddexp", parts);
    }
    return push_compute(make(Op::kLogAddExp, parts));
  }

  NodeId log_softmax(NodeId a) {
    int r = val(a).rank();
    if (r != 1 && r != 2) fail_shape("log_softmax", {a});
    return push_compute(make(Op::kLogSoftmax, {a}));
  }

  // Mean negative log-likelihood of per-row targets under softmax(logits).
  NodeId softmax_xent(NodeId logits, const std::vector<int64_t>& targets) {
    const Tensor& t = val(logits);
    if (t.rank() != 2 || static_cast<int64_t>(targets.size()) != t.dim(0)) {
      fail_shape("softmax_xent", {logits});
    }
    for (int64_t y : targets) {
      if (y < 0 || y >= t.dim(1)) throw_validation("softmax_xent: target out of range");
    }
    Node n = make(Op::kSoftmaxXent, {logits});
    n.ints = targets;
    return push_compute(std::move(n));
  }

  NodeId mse(NodeId a, NodeId b) {
    if (!val(a).same_shape(val(b))) fail_shape("mse", {a, b});
    return push_compute(make(Op::kMse, {a, b}));
  }

  NodeId dot(NodeId a, NodeId b) {
    if (val(a).rank() != 1 || !val(a).same_shape(val(b))) fail_shape("dot", {a, b});
    return push_compute(make(Op::kDot, {a, b}));
  }

  NodeId sum(NodeId a) { return push_compute(make(Op::kSum, {a})); }

  // Identity in the forward pass; multiplies the incoming gradient by -1.
  NodeId grad_reverse(NodeId a) { return push_compute(make(Op::kGradReverse, {a})); }

  // Identity in the forward pass; blocks the incoming gradient.
  NodeId stop_gradient(NodeId a) { return push_compute(make(Op::kStopGradient, {a})); }

  // Train-only Bernoulli mask with inverted scaling; the mask is sampled once
  // at construction so recomputation (and finite differencing) sees a fixed
  // linear map.
  NodeId dropout(NodeId a, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw_validation("dropout: p must be in [0,1), got ", p);
    const Tensor& t = val(a);
    std::vector<double> mask(static_cast<size_t>(t.numel()));
    double keep = 1.0 - p;
    for (auto& m : mask) m = rng.uniform() < p ? 0.0 : 1.0 / keep;
    Node n = make(Op::kDropout, {a});
    n.scalar = p;
    n.aux = Tensor(t.shape(), std::move(mask));
    return push_compute(std::move(n));
  }

  // ---- evaluation ----

  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  Op op_of(NodeId id) const { return nodes_[static_cast<size_t>(id)].op; }
  const std::vector<NodeId>& args_of(NodeId id) const {
    return nodes_[static_cast<size_t>(id)].args;
  }
  size_t num_nodes() const { return nodes_.size(); }

  void mark_output(const std::string& name, NodeId id) { output_ids_[name] = id; }

  // Rebinds the named inputs, re-reads parameters from the store, and
  // recomputes every node in order. Returns the marked outputs.
  NamedTensors forward(const NamedTensors& inputs = {}) {
    bind_inputs(inputs);
    recompute(/*fd_mode=*/false);
    NamedTensors out;
    for (const auto& [name, id] : output_ids_) out.emplace(name, value(id));
    return out;
  }

  // Gradient of a scalar loss with respect to every parameter node, by a
  // single reverse sweep with fan-out accumulation. Also retains per-node
  // adjoints for inspection until the next backward call.
  NamedTensors backward(NodeId loss) {
    const Tensor& lv = val(loss);
    if (lv.numel() != 1) {
      throw_validation("backward: loss node ", loss, " (", op_name(nodes_[loss].op),
                       ") is not scalar, shape ", shape_str(lv.shape()));
    }
    adjoints_.assign(nodes_.size(), {});
    adj(loss).assign(1, 1.0);
    for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
      if (adjoints_[static_cast<size_t>(id)].empty()) continue;
      propagate(id);
    }
    NamedTensors grads;
    for (const auto& [name, id] : param_ids_) {
      const auto& a = adjoints_[static_cast<size_t>(id)];
      Tensor g = a.empty() ? Tensor::zeros(val(id).shape()) : make_grad(name, val(id).shape(), a);
      grads.emplace(name, std::move(g));
    }
    return grads;
  }

  // Adjoint of a node from the most recent backward pass (zeros if the node
  // did not participate).
  Tensor adjoint(NodeId id) const {
    const auto& a = adjoints_[static_cast<size_t>(id)];
    if (a.empty()) return Tensor::zeros(val(id).shape());
    return Tensor(val(id).shape(), a);
  }

  // Central-difference verification of backward() for every parameter entry.
  // Nodes whose backward rule is deliberately not the derivative of their
  // forward map (grad_reverse, stop_gradient) are finite-differenced through
  // an equivalent surrogate: grad_reverse(x) ~ 2*frozen(x) - x and
  // stop_gradient(x) ~ frozen(x), where frozen(x) is the unperturbed forward
  // value. The surrogate's true derivative matches the declared backward
  // rule, so the check covers mixed paths through reversal layers.
  GradReport check_gradients(const NamedTensors& inputs, NodeId loss, double eps) {
    if (!(eps > 0.0 && eps <= 1e-2)) throw_validation("check_gradients: eps must be in (0, 1e-2]");
    if (params_ == nullptr) throw_validation("check_gradients: no ParamStore attached");
    bind_inputs(inputs);
    recompute(/*fd_mode=*/false);  // refreshes frozen snapshots
    if (val(loss).numel() != 1) throw_validation("check_gradients: loss is not scalar");
    NamedTensors analytic = backward(loss);

    GradReport report;
    report.eps = eps;
    for (const auto& [name, id] : param_ids_) {
      Tensor& p = params_->at_mut(name);
      const Tensor& g = analytic.at(name);
      GradReport::Entry entry;
      entry.param = name;
      auto data = p.data_mut();
      for (int64_t i = 0; i < p.numel(); ++i) {
        double saved = data[i];
        data[i] = saved + eps;
        recompute(/*fd_mode=*/true);
        double lp = val(loss).item();
        data[i] = saved - eps;
        recompute(/*fd_mode=*/true);
        double lm = val(loss).item();
        data[i] = saved;
        double fd = (lp - lm) / (2.0 * eps);
        double ga = g[i];
        double abs_err = std::abs(fd - ga);
        double rel = abs_err / std::max({1.0, std::abs(fd), std::abs(ga)});
        entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
        entry.max_rel_error = std::max(entry.max_rel_error, rel);
      }
      report.entries.push_back(std::move(entry));
    }
    recompute(/*fd_mode=*/false);
    return report;
  }

  const std::map<std::string, NodeId>& param_nodes() const { return param_ids_; }

 private:
  struct Node {
    Op op = Op::kConstant;
    std::vector<NodeId> args;
    Tensor value;
    Tensor frozen;               // unperturbed forward snapshot (grl / stopgrad)
    Tensor aux;                  // dropout mask
    std::vector<int64_t> ints;   // axis/start/stop, indices, targets, dims
    double scalar = 0.0;
    std::string name;
  };

  Node make(Op op, std::vector<NodeId> args) {
    for (NodeId a : args) {
      if (a < 0 || a >= static_cast<NodeId>(nodes_.size())) {
        throw_validation(op_name(op), ": argument references unknown node ", a);
      }
    }
    Node n;
    n.op = op;
    n.args = std::move(args);
    return n;
  }

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  NodeId push_compute(Node n) {
    NodeId id = push(std::move(n));
    compute(id, /*fd_mode=*/false);
    return id;
  }

  const Tensor& val(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }

  [[noreturn]] void fail_shape(const char* op, const std::vector<NodeId>& args) {
    std::string msg = str_cat("shape mismatch at ", op, " over node(s)");
    for (NodeId a : args) {
      msg += str_cat(" #", a, " (", op_name(nodes_[static_cast<size_t>(a)].op), " ",
                     shape_str(val(a).shape()), ")");
    }
    throw ValidationError(msg);
  }

  void bind_inputs(const NamedTensors& inputs) {
    for (const auto& [name, value] : inputs) {
      auto it = input_ids_.find(name);
      if (it == input_ids_.end()) throw_validation("forward: unknown input '", name, "'");
      Node& n = nodes_[static_cast<size_t>(it->second)];
      if (!value.same_shape(n.value)) {
        throw_validation("forward: input '", name, "' shape ", shape_str(value.shape()),
                         " does not match declared ", shape_str(n.value.shape()));
      }
      n.value = value;
    }
  }

  void recompute(bool fd_mode) {
    for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) {
      compute(id, fd_mode);
    }
  }

  Tensor make_grad(const std::string& name, const Shape& shape, const std::vector<double>& data) {
    for (double v : data) {
      if (!std::isfinite(v)) throw_numerical("backward: non-finite gradient for '", name, "'");
    }
    return Tensor(shape, data);
  }

  std::vector<double>& adj(NodeId id) {
    auto& a = adjoints_[static_cast<size_t>(id)];
    if (a.empty()) a.assign(static_cast<size_t>(val(id).numel()), 0.0);
    return a;
  }

  Tensor wrap_value(NodeId id, Shape shape, std::vector<double> data) {
    for (double v : data) {
      if (!std::isfinite(v)) {
        throw_numerical("non-finite value at node ", id, " (",
                        op_name(nodes_[static_cast<size_t>(id)].op), ")");
      }
    }
    return Tensor(std::move(shape), std::move(data));
  }

  static void axis_blocks(const Shape& shape, int axis, int64_t& outer, int64_t& inner) {
    outer = 1;
    inner = 1;
    for (int d = 0; d < axis; ++d) outer *= shape[static_cast<size_t>(d)];
    for (int d = axis + 1; d < static_cast<int>(shape.size()); ++d) {
      inner *= shape[static_cast<size_t>(d)];
    }
  }

  void compute(NodeId id, bool fd_mode);
  void propagate(NodeId id);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> adjoints_;
  std::map<std::string, NodeId> input_ids_;
  std::map<std::string, NodeId> param_ids_;
  std::map<std::string, NodeId> output_ids_;
  ParamStore* params_ = nullptr;
};

// ---- forward kernels ----

inline void Graph::compute(NodeId id, bool fd_mode) {
  Node& n = nodes_[static_cast<size_t>(id)];
  auto arg = [&](size_t i) -> const Tensor& { return nodes_[static_cast<size_t>(n.args[i])].value; };
  switch (n.op) {
    case Op::kConstant:
    case Op::kInput:
      return;
    case Op::kParam:
      n.value = params_->at(n.name);
      return;
    case Op::kMatMul: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      int64_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
      std::vector<double> out(static_cast<size_t>(m * p), 0.0);
      const auto da = a.data();
      const auto db = b.data();
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t kk = 0; kk < k; ++kk) {
          double av = da[static_cast<size_t>(i * k + kk)];
          if (av == 0.0) continue;
          const double* brow = &db[static_cast<size_t>(kk * p)];
          double* orow = &out[static_cast<size_t>(i * p)];
          for (int64_t j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
      }
      n.value = wrap_value(id, {m, p}, std::move(out));
      return;
    }
    case Op::kTranspose: {
      const Tensor& a = arg(0);
      int64_t r = a.dim(0), c = a.dim(1);
      std::vector<double> out(static_cast<size_t>(r * c));
      for (int64_t i = 0; i < r; ++i) {
        for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(j * r + i)] = a.at(i, j);
      }
      n.value = wrap_value(id, {c, r}, std::move(out));
      return;
    }
    case Op::kAdd: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      std::vector<double> out(static_cast<size_t>(a.numel()));
      if (a.same_shape(b)) {
        for (int64_t i = 0; i < a.numel(); ++i) out[static_cast<size_t>(i)] = a[i] + b[i];
      } else {
        int64_t rows = a.dim(0), cols = a.dim(1);
        for (int64_t i = 0; i < rows; ++i) {
          for (int64_t j = 0; j < cols; ++j) {
            out[static_cast<size_t>(i * cols + j)] = a.at(i, j) + b[j];
          }
        }
      }
      n.value = wrap_value(id, a.shape(), std::move(out));
      return;
    }
    case Op::kMul: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      std::vector<double> out(static_cast<size_t>(a.numel()));
      for (int64_t i = 0; i < a.numel(); ++i) out[static_cast<size_t>(i)] = a[i] * b[i];
      n.value = wrap_value(id, a.shape(), std::move(out));
      return;
    }
    case Op::kScale: {
      const Tensor& a = arg(0);
      std::vector<double> out(static_cast<size_t>(a.numel()));
      for (int64_t i = 0; i < a.numel(); ++i) out[static_cast<size_t>(i)] = n.scalar * a[i];
      n.value = wrap_value(id, a.shape(), std::move(out));
      return;
    }
    case Op::kRelu: {
      const Tensor& a = arg(0);
      std::vector<double> out(static_cast<size_t>(a.numel()));
      for (int64_t i = 0; i < a.numel(); ++i) out[static_cast<size_t>(i)] = a[i] > 0.0 ? a[i] : 0.0;
      n.value = wrap_value(id, a.shape(), std::move(out));
      return;
    }
    case Op::kLogistic: {
      const Tensor& a = arg(0);
      std::vector<double> out(static_cast<size_t>(a.numel()));
      for (int64_t i = 0; i < a.numel(); ++i) {
        double x = a[i];
        out[static_cast<size_t>(i)] =
            x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      }
      n.value = wrap_value(id, a.shape(), std::move(out));
      return;
    }
    case Op::kTanh: {
      const Tensor& a = arg(0);
      std::vector<double> out(static_cast<size_t>(a.numel()));
      for (int64_t i = 0; i < a.numel(); ++i) out[static_cast<size_t>(i)] = std::tanh(a[i]);
      n.value = wrap_value(id, a.shape(), std::move(out));
      return;
    }
    case Op::kExp: {
      const Tensor& a = arg(0);
      std::vector<double> out(static_cast<size_t>(a.numel()));
      for (int64_t i = 0; i < a.numel(); ++i) out[static_cast<size_t>(i)] = std::exp(a[i]);
      n.value = wrap_value(id, a.shape(), std::move(out));
      return;
    }
    case Op::kLog: {
      const Tensor& a = arg(0);
      std::vector<double> out(static_cast<size_t>(a.numel()));
      for (int64_t i = 0; i < a.numel(); ++i) {
        if (a[i] <= 0.0) throw_numerical("log: non-positive input at node ", id);
        out[static_cast<size_t>(i)] = std::log(a[i]);
      }
      n.value = wrap_value(id, a.shape(), std::move(out));
      return;
    }
    case Op::kConcat: {
      int axis = static_cast<int>(n.ints[0]);
      Shape shape = arg(0).shape();
      int64_t total_axis = 0;
      for (size_t i = 0; i < n.args.size(); ++i) total_axis += arg(i).dim(axis);
      shape[static_cast<size_t>(axis)] = total_axis;
      int64_t outer, inner;
      axis_blocks(shape, axis, outer, inner);
      std::vector<double> out(static_cast<size_t>(shape_numel(shape)));
      int64_t offset = 0;
      for (size_t i = 0; i < n.args.size(); ++i) {
        const Tensor& t = arg(i);
        int64_t ai = t.dim(axis);
        const auto src = t.data();
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t x = 0; x < ai * inner; ++x) {
            out[static_cast<size_t>((o * total_axis + offset) * inner + x)] =
                src[static_cast<size_t>(o * ai * inner + x)];
          }
        }
        offset += ai;
      }
      n.value = wrap_value(id, std::move(shape), std::move(out));
      return;
    }
    case Op::kSlice: {
      const Tensor& a = arg(0);
      int axis = static_cast<int>(n.ints[0]);
      int64_t start = n.ints[1], stop = n.ints[2];
      Shape shape = a.shape();
      int64_t in_axis = shape[static_cast<size_t>(axis)];
      shape[static_cast<size_t>(axis)] = stop - start;
      int64_t outer, inner;
      axis_blocks(shape, axis, outer, inner);
      std::vector<double> out(static_cast<size_t>(shape_numel(shape)));
      const auto src = a.data();
      int64_t w = stop - start;
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t x = 0; x < w * inner; ++x) {
          out[static_cast<size_t>(o * w * inner + x)] =
              src[static_cast<size_t>((o * in_axis + start) * inner + x)];
        }
      }
      n.value = wrap_value(id, std::move(shape), std::move(out));
      return;
    }
    case Op::kReshape: {
      const Tensor& a = arg(0);
      Shape dims(n.ints.begin(), n.ints.end());
      n.value = Tensor(std::move(dims), std::vector<double>(a.data().begin(), a.data().end()));
      return;
    }
    case Op::kGatherRows: {
      const Tensor& a = arg(0);
      int64_t cols = a.dim(1);
      std::vector<double> out(n.ints.size() * static_cast<size_t>(cols));
      for (size_t i = 0; i < n.ints.size(); ++i) {
        const double* src = &a.data()[static_cast<size_t>(n.ints[i] * cols)];
        std::copy(src, src + cols, &out[i * static_cast<size_t>(cols)]);
      }
      n.value = wrap_value(id, {static_cast<int64_t>(n.ints.size()), cols}, std::move(out));
      return;
    }
    case Op::kGatherCols: {
      const Tensor& a = arg(0);
      int64_t rows = a.dim(0);
      int64_t k = static_cast<int64_t>(n.ints.size());
      std::vector<double> out(static_cast<size_t>(rows * k));
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < k; ++j) {
          out[static_cast<size_t>(r * k + j)] = a.at(r, n.ints[static_cast<size_t>(j)]);
        }
      }
      n.value = wrap_value(id, {rows, k}, std::move(out));
      return;
    }
    case Op::kLogSumExp: {
      const Tensor& a = arg(0);
      int64_t k = a.dim(a.rank() - 1);
      int64_t rows = a.numel() / k;
      Shape shape(a.shape().begin(), a.shape().end() - 1);
      std::vector<double> out(static_cast<size_t>(rows));
      for (int64_t r = 0; r < rows; ++r) {
        const double* row = &a.data()[static_cast<size_t>(r * k)];
        double m = row[0];
        for (int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        double s = 0.0;
        for (int64_t j = 0; j < k; ++j) s += std::exp(row[j] - m);
        out[static_cast<size_t>(r)] = m + std::log(s);
      }
      n.value = wrap_value(id, std::move(shape), std::move(out));
      return;
    }
    case Op::kLogAddExp: {
      int64_t numel = arg(0).numel();
      std::vector<double> out(static_cast<size_t>(numel));
      for (int64_t i = 0; i < numel; ++i) {
        double m = arg(0)[i];
        for (size_t p = 1; p < n.args.size(); ++p) m = std::max(m, arg(p)[i]);
        double s = 0.0;
        for (size_t p = 0; p < n.args.size(); ++p) s += std::exp(arg(p)[i] - m);
        out[static_cast<size_t>(i)] = m + std::log(s);
      }
      n.value = wrap_value(id, arg(0).shape(), std::move(out));
      return;
    }
    case Op::kLogSoftmax: {
      const Tensor& a = arg(0);
      int64_t k = a.dim(a.rank() - 1);
      int64_t rows = a.numel() / k;
      std::vector<double> out(static_cast<size_t>(a.numel()));
      for (int64_t r = 0; r < rows; ++r) {
        const double* row = &a.data()[static_cast<size_t>(r * k)];
        double m = row[0];
        for (int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        double s = 0.0;
        for (int64_t j = 0; j < k; ++j) s += std::exp(row[j] - m);
        double lse = m + std::log(s);
        for (int64_t j = 0; j < k; ++j) out[static_cast<size_t>(r * k + j)] = row[j] - lse;
      }
      n.value = wrap_value(id, a.shape(), std::move(out));
      return;
    }
    case Op::kSoftmaxXent: {
      const Tensor& a = arg(0);
      int64_t rows = a.dim(0), k = a.dim(1);
      double total = 0.0;
      for (int64_t r = 0; r < rows; ++r) {
        const double* row = &a.data()[static_cast<size_t>(r * k)];
        double m = row[0];
        for (int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        double s = 0.0;
        for (int64_t j = 0; j < k; ++j) s += std::exp(row[j] - m);
        total += (m + std::log(s)) - row[n.ints[static_cast<size_t>(r)]];
      }
      n.value = wrap_value(id, {}, {total / static_cast<double>(rows)});
      return;
    }
    case Op::kMse: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      double s = 0.0;
      for (int64_t i = 0; i < a.numel(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
      }
      n.value = wrap_value(id, {}, {s / static_cast<double>(a.numel())});
      return;
    }
    case Op::kDot: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      double s = 0.0;
      for (int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
      n.value = wrap_value(id, {}, {s});
      return;
    }
    case Op::kSum: {
      const Tensor& a = arg(0);
      double s = 0.0;
      for (int64_t i = 0; i < a.numel(); ++i) s += a[i];
      n.value = wrap_value(id, {}, {s});
      return;
    }
    case Op::kGradReverse: {
      const Tensor& a = arg(0);
      if (!fd_mode) {
        n.value = a;
        n.frozen = a;
      } else {
        std::vector<double> out(static_cast<size_t>(a.numel()));
        for (int64_t i = 0; i < a.numel(); ++i) {
          out[static_cast<size_t>(i)] = 2.0 * n.frozen[i] - a[i];
        }
        n.value = wrap_value(id, a.shape(), std::move(out));
      }
      return;
    }
    case Op::kStopGradient: {
      const Tensor& a = arg(0);
      if (!fd_mode) {
        n.value = a;
        n.frozen = a;
      } else {
        n.value = n.frozen;
      }
      return;
    }
    case Op::kDropout: {
      const Tensor& a = arg(0);
      std::vector<double> out(static_cast<size_t>(a.numel()));
      for (int64_t i = 0; i < a.numel(); ++i) out[static_cast<size_t>(i)] = a[i] * n.aux[i];
      n.value = wrap_value(id, a.shape(), std::move(out));
      return;
    }
  }
}

// ---- backward kernels ----

inline void Graph::propagate(NodeId id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const std::vector<double>& g = adjoints_[static_cast<size_t>(id)];
  auto arg = [&](size_t i) -> const Tensor& { return nodes_[static_cast<size_t>(n.args[i])].value; };
  auto gin = [&](size_t i) -> std::vector<double>& { return adj(n.args[i]); };
  switch (n.op) {
    case Op::kConstant:
    case Op::kInput:
    case Op::kParam:
      return;
    case Op::kMatMul: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      int64_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
      auto& ga = gin(0);
      auto& gb = gin(1);
      // dA = g . B^T ; dB = A^T . g
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t kk = 0; kk < k; ++kk) {
          double s = 0.0;
          const double* grow = &g[static_cast<size_t>(i * p)];
          const double* brow = &b.data()[static_cast<size_t>(kk * p)];
          for (int64_t j = 0; j < p; ++j) s += grow[j] * brow[j];
          ga[static_cast<size_t>(i * k + kk)] += s;
        }
      }
      for (int64_t kk = 0; kk < k; ++kk) {
        for (int64_t i = 0; i < m; ++i) {
          double av = a.at(i, kk);
          if (av == 0.0) continue;
          const double* grow = &g[static_cast<size_t>(i * p)];
          double* brow = &gb[static_cast<size_t>(kk * p)];
          for (int64_t j = 0; j < p; ++j) brow[j] += av * grow[j];
        }
      }
      return;
    }
    case Op::kTranspose: {
      const Tensor& a = arg(0);
      int64_t r = a.dim(0), c = a.dim(1);
      auto& ga = gin(0);
      for (int64_t i = 0; i < r; ++i) {
        for (int64_t j = 0; j < c; ++j) {
          ga[static_cast<size_t>(i * c + j)] += g[static_cast<size_t>(j * r + i)];
        }
      }
      return;
    }
    case Op::kAdd: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      auto& gb = gin(1);
      if (a.same_shape(b)) {
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      } else {
        int64_t rows = a.dim(0), cols = a.dim(1);
        for (int64_t i = 0; i < rows; ++i) {
          for (int64_t j = 0; j < cols; ++j) {
            gb[static_cast<size_t>(j)] += g[static_cast<size_t>(i * cols + j)];
          }
        }
      }
      return;
    }
    case Op::kMul: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      auto& ga = gin(0);
      auto& gb = gin(1);
      for (size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * b[static_cast<int64_t>(i)];
        gb[i] += g[i] * a[static_cast<int64_t>(i)];
      }
      return;
    }
    case Op::kScale: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * g[i];
      return;
    }
    case Op::kRelu: {
      const Tensor& a = arg(0);
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) {
        if (a[static_cast<int64_t>(i)] > 0.0) ga[i] += g[i];
      }
      return;
    }
    case Op::kLogistic: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) {
        double y = n.value[static_cast<int64_t>(i)];
        ga[i] += g[i] * y * (1.0 - y);
      }
      return;
    }
    case Op::kTanh: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) {
        double y = n.value[static_cast<int64_t>(i)];
        ga[i] += g[i] * (1.0 - y * y);
      }
      return;
    }
    case Op::kExp: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[static_cast<int64_t>(i)];
      return;
    }
    case Op::kLog: {
      const Tensor& a = arg(0);
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[static_cast<int64_t>(i)];
      return;
    }
    case Op::kConcat: {
      int axis = static_cast<int>(n.ints[0]);
      const Shape& shape = n.value.shape();
      int64_t total_axis = shape[static_cast<size_t>(axis)];
      int64_t outer, inner;
      axis_blocks(shape, axis, outer, inner);
      int64_t offset = 0;
      for (size_t i = 0; i < n.args.size(); ++i) {
        const Tensor& t = arg(i);
        int64_t ai = t.dim(axis);
        auto& ga = gin(i);
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t x = 0; x < ai * inner; ++x) {
            ga[static_cast<size_t>(o * ai * inner + x)] +=
                g[static_cast<size_t>((o * total_axis + offset) * inner + x)];
          }
        }
        offset += ai;
      }
      return;
    }
    case Op::kSlice: {
      const Tensor& a = arg(0);
      int axis = static_cast<int>(n.ints[0]);
      int64_t start = n.ints[1], stop = n.ints[2];
      int64_t in_axis = a.dim(axis);
      int64_t outer, inner;
      axis_blocks(n.value.shape(), axis, outer, inner);
      auto& ga = gin(0);
      int64_t w = stop - start;
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t x = 0; x < w * inner; ++x) {
          ga[static_cast<size_t>((o * in_axis + start) * inner + x)] +=
              g[static_cast<size_t>(o * w * inner + x)];
        }
      }
      return;
    }
    case Op::kReshape: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      return;
    }
    case Op::kGatherRows: {
      const Tensor& a = arg(0);
      int64_t cols = a.dim(1);
      auto& ga = gin(0);
      for (size_t i = 0; i < n.ints.size(); ++i) {
        for (int64_t j = 0; j < cols; ++j) {
          ga[static_cast<size_t>(n.ints[i] * cols + j)] +=
              g[i * static_cast<size_t>(cols) + static_cast<size_t>(j)];
        }
      }
      return;
    }
    case Op::kGatherCols: {
      const Tensor& a = arg(0);
      int64_t rows = a.dim(0);
      int64_t cols = a.dim(1);
      int64_t k = static_cast<int64_t>(n.ints.size());
      auto& ga = gin(0);
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < k; ++j) {
          ga[static_cast<size_t>(r * cols + n.ints[static_cast<size_t>(j)])] +=
              g[static_cast<size_t>(r * k + j)];
        }
      }
      return;
    }
    case Op::kLogSumExp: {
      const Tensor& a = arg(0);
      int64_t k = a.dim(a.rank() - 1);
      int64_t rows = a.numel() / k;
      auto& ga = gin(0);
      for (int64_t r = 0; r < rows; ++r) {
        double out = n.value[r];
        double gr = g[static_cast<size_t>(r)];
        for (int64_t j = 0; j < k; ++j) {
          ga[static_cast<size_t>(r * k + j)] += gr * std::exp(a[r * k + j] - out);
        }
      }
      return;
    }
    case Op::kLogAddExp: {
      for (size_t p = 0; p < n.args.size(); ++p) {
        const Tensor& a = arg(p);
        auto& ga = gin(p);
        for (size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * std::exp(a[static_cast<int64_t>(i)] - n.value[static_cast<int64_t>(i)]);
        }
      }
      return;
    }
    case Op::kLogSoftmax: {
      const Tensor& a = arg(0);
      int64_t k = a.dim(a.rank() - 1);
      int64_t rows = a.numel() / k;
      auto& ga = gin(0);
      for (int64_t r = 0; r < rows; ++r) {
        double gs = 0.0;
        for (int64_t j = 0; j < k; ++j) gs += g[static_cast<size_t>(r * k + j)];
        for (int64_t j = 0; j < k; ++j) {
          ga[static_cast<size_t>(r * k + j)] +=
              g[static_cast<size_t>(r * k + j)] - std::exp(n.value[r * k + j]) * gs;
        }
      }
      return;
    }
    case Op::kSoftmaxXent: {
      const Tensor& a = arg(0);
      int64_t rows = a.dim(0), k = a.dim(1);
      auto& ga = gin(0);
      double gs = g[0] / static_cast<double>(rows);
      for (int64_t r = 0; r < rows; ++r) {
        const double* row = &a.data()[static_cast<size_t>(r * k)];
        double m = row[0];
        for (int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        double s = 0.0;
        for (int64_t j = 0; j < k; ++j) s += std::exp(row[j] - m);
        for (int64_t j = 0; j < k; ++j) {
          double soft = std::exp(row[j] - m) / s;
          double onehot = (j == n.ints[static_cast<size_t>(r)]) ? 1.0 : 0.0;
          ga[static_cast<size_t>(r * k + j)] += gs * (soft - onehot);
        }
      }
      return;
    }
    case Op::kMse: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      auto& ga = gin(0);
      auto& gb = gin(1);
      double c = 2.0 * g[0] / static_cast<double>(a.numel());
      for (int64_t i = 0; i < a.numel(); ++i) {
        double d = c * (a[i] - b[i]);
        ga[static_cast<size_t>(i)] += d;
        gb[static_cast<size_t>(i)] -= d;
      }
      return;
    }
    case Op::kDot: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      auto& ga = gin(0);
      auto& gb = gin(1);
      for (int64_t i = 0; i < a.numel(); ++i) {
        ga[static_cast<size_t>(i)] += g[0] * b[i];
        gb[static_cast<size_t>(i)] += g[0] * a[i];
      }
      return;
    }
    case Op::kSum: {
      auto& ga = gin(0);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
      return;
    }
    case Op::kGradReverse: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
      return;
    }
    case Op::kStopGradient:
      return;
    case Op::kDropout: {
      auto& ga = gin(0);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.aux[static_cast<int64_t>(i)];
      return;
    }
  }
}

}  // namespace specfact

#endif  // SPECFACT_GRAPH_HPP
