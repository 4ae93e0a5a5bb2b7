#include "agn/tape.hpp"

#include "agn/error.hpp"

namespace agn {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kVariable: return "variable";
    case OpKind::kParam: return "param";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kReshape: return "reshape";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLog: return "log";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kEmbedding: return "embedding";
    case OpKind::kMaskedFill: return "masked_fill";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSumAxis: return "sum_axis";
    case OpKind::kSquaredError: return "squared_error";
  }
  return "?";
}

const NDArray& Var::value() const {
  if (!tape) throw ValueError("unbound Var");
  return tape->value(id);
}

static void require_finite(const NDArray& v, const char* what) {
  if (!v.all_finite()) throw ValueError(std::string("non-finite values in ") + what);
}

Var Tape::constant(NDArray value) {
  require_finite(value, "constant input");
  return record(OpKind::kConstant, std::move(value), {}, nullptr);
}

Var Tape::variable(NDArray value) {
  require_finite(value, "variable input");
  return record(OpKind::kVariable, std::move(value), {}, nullptr);
}

Var Tape::param(const ParamStore& store, const std::string& path) {
  if (auto it = param_nodes_.find(path); it != param_nodes_.end()) return Var{this, it->second};
  const auto& p = store.at(path);
  require_finite(p.value, path.c_str());
  Var v = record(OpKind::kParam, p.value, {}, nullptr);
  nodes_[v.id].param_path = path;
  param_nodes_.emplace(path, v.id);
  return v;
}

Var Tape::record(OpKind kind, NDArray value, std::vector<std::size_t> inputs, BackwardFn fn) {
  if (kind != OpKind::kConstant && kind != OpKind::kVariable && kind != OpKind::kParam &&
      !value.all_finite())
    throw ValueError(std::string("operator ") + op_name(kind) + " produced non-finite output");
  Node n{kind, std::move(value), NDArray{}, false, std::move(inputs),
         requires_grad_ ? std::move(fn) : nullptr, {}};
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

NDArray& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad = NDArray(n.value.shape(), 0.0);
    n.grad_ready = true;
  }
  return n.grad;
}

const NDArray* Tape::grad_if(Var v) const {
  const Node& n = nodes_[v.id];
  return n.grad_ready ? &n.grad : nullptr;
}

void Tape::reverse_sweep(Var loss) {
  if (loss.tape != this) throw ValueError("loss belongs to another tape");
  if (!requires_grad_) throw ValueError("backward on a tape recorded without gradients");
  if (value(loss.id).size() != 1)
    throw ShapeError("backward requires a scalar loss, got shape " +
                     shape_str(value(loss.id).shape()));
  grad(loss.id).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.grad_ready || !n.backward) continue;
    n.backward(*this, i);
  }
}

void Tape::backward(Var loss) { reverse_sweep(loss); }

void Tape::backward(Var loss, ParamStore& store) {
  reverse_sweep(loss);
  for (const auto& [path, id] : param_nodes_) {
    const Node& n = nodes_[id];
    if (!n.grad_ready) continue;
    auto& g = store.at(path).grad.raw();
    const auto& src = n.grad.raw();
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += src[k];
  }
}

std::vector<std::uint8_t> Tape::kink_signature() const {
  std::vector<std::uint8_t> sig;
  for (const Node& n : nodes_) {
    if (n.kind != OpKind::kRelu) continue;
    for (double x : nodes_[n.inputs[0]].value.raw()) sig.push_back(x > 0.0 ? 1 : 0);
  }
  return sig;
}

}  // namespace agn
