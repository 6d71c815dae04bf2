#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include "advrec/rng.hpp"
#include "advrec/tensor.hpp"

namespace advrec {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class OpKind : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,      // elementwise
  kAffine,   // a*x + b with scalar constants
  kScale,    // x * s with s a size-1 node
  kMatVec,
  kConcat,
  kRelu,
  kSigmoid,
  kTanh,
  kSoftmax,
  kLog,
  kClamp,
  kSum,
  kPick,
  kDropout,
};

std::string_view op_name(OpKind kind);

/// Reverse-mode autodiff over an append-only operation tape.
///
/// Construction runs the forward pass eagerly, so node outputs are always
/// populated and inputs always precede their consumers. backward() walks the
/// tape in exact reverse construction order, accumulating gradients into
/// every node that (transitively) depends on a gradient-requiring leaf.
class Graph {
 public:
  NodeId leaf(Tensor value, bool requires_grad = false);
  NodeId constant(Tensor value) { return leaf(std::move(value), false); }

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId affine(NodeId x, double scale, double shift);
  NodeId scale_by(NodeId x, NodeId s);
  NodeId matvec(NodeId w, NodeId x);
  NodeId concat(NodeId a, NodeId b);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId tanh(NodeId x);
  NodeId softmax(NodeId x);
  NodeId log(NodeId x);
  NodeId clamp(NodeId x, double lo, double hi);
  NodeId sum(NodeId x);
  NodeId pick(NodeId x, std::size_t index);
  /// Training-mode dropout: zeroes each entry with probability `rate` and
  /// scales survivors by 1/(1-rate). Inference callers simply skip the node.
  NodeId dropout(NodeId x, double rate, Rng& rng, bool training = true);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(NodeId id) const;
  /// Value of a size-1 node.
  double scalar(NodeId id) const;

  /// Backward from a size-1 root (seed 1.0) or from any node with an explicit
  /// seed of matching shape. May be called repeatedly; every call recomputes
  /// all gradients from scratch.
  void backward(NodeId root);
  void backward(NodeId root, const Tensor& seed);

  /// Gradient of the last backward root w.r.t. this node.
  /// Throws StateError if backward has not run on this graph.
  const Tensor& grad(NodeId id) const;
  bool has_grads() const noexcept { return grads_valid_; }

 private:
  struct Node {
    OpKind kind;
    std::array<NodeId, 2> in{kNoNode, kNoNode};
    Tensor out;
    bool requires_grad = false;
    double a = 0.0;                // affine scale / clamp lo
    double b = 0.0;                // affine shift / clamp hi
    std::size_t index = 0;         // pick
    std::vector<double> mask;      // dropout multipliers
  };

  NodeId push(Node node);
  const Node& at(NodeId id) const;
  Tensor& grad_buffer(NodeId id);
  void backprop_node(NodeId id);

  std::vector<Node> nodes_;
  mutable std::vector<Tensor> grads_;
  bool grads_valid_ = false;
};

}  // namespace advrec
