#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "agn/ndarray.hpp"
#include "agn/param_store.hpp"

namespace agn {

class Tape;

enum class OpKind : std::uint8_t {
  kConstant,
  kVariable,
  kParam,
  kMatmul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kScale,
  kConcat,
  kSlice,
  kReshape,
  kRelu,
  kSigmoid,
  kLog,
  kSoftmax,
  kLogSoftmax,
  kLayerNorm,
  kEmbedding,
  kMaskedFill,
  kSum,
  kMean,
  kSumAxis,
  kSquaredError,
};

const char* op_name(OpKind kind);

// Handle to a node on a Tape. Cheap to copy; valid while the Tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const NDArray& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Records operators in execution order. Inputs of a node always precede it, so
// the reverse pass is a single sweep from the loss node down to 0.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool requires_grad = true) : requires_grad_(requires_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool requires_grad() const noexcept { return requires_grad_; }

  Var constant(NDArray value);
  // Leaf whose gradient is kept on the tape (used for input sensitivities).
  Var variable(NDArray value);
  // Leaf bound to a stored parameter. Repeated lookups of one path share a node.
  Var param(const ParamStore& store, const std::string& path);

  Var record(OpKind kind, NDArray value, std::vector<std::size_t> inputs, BackwardFn fn);

  const NDArray& value(std::size_t id) const { return nodes_[id].value; }
  const NDArray& value(Var v) const { return nodes_[v.id].value; }
  OpKind kind(std::size_t id) const { return nodes_[id].kind; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  // Gradient slot of a node, allocated as zeros on first access.
  NDArray& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return nodes_[id].grad_ready; }
  const NDArray* grad_if(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Parameter gradients are accumulated into
  // `store`; nodes not reachable from the loss receive nothing.
  void backward(Var loss, ParamStore& store);
  void backward(Var loss);

  // Sign pattern of every relu input; two evaluations with equal signatures lie
  // in the same smooth region of the graph.
  std::vector<std::uint8_t> kink_signature() const;

 private:
  struct Node {
    OpKind kind;
    NDArray value;
    NDArray grad;
    bool grad_ready = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::string param_path;
  };

  void reverse_sweep(Var loss);

  bool requires_grad_;
  std::deque<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_nodes_;
};

}  // namespace agn
