#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "advrec/graph.hpp"
#include "advrec/rng.hpp"
#include "advrec/tensor.hpp"

namespace advrec {

/// Gradients keyed by parameter name.
using GradMap = std::map<std::string, Tensor, std::less<>>;

/// Named parameter collection. Iteration follows insertion order, so
/// checkpoint layout and optimizer update order are deterministic.
class ParamSet {
 public:
  Tensor& add(std::string name, Tensor value);
  bool has(std::string_view name) const noexcept;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  const std::vector<std::string>& names() const noexcept { return order_; }
  std::size_t size() const noexcept { return order_.size(); }

 private:
  std::vector<std::string> order_;
  std::map<std::string, Tensor, std::less<>> values_;
};

/// rows x cols matrix with entries uniform in (-1/sqrt(cols), +1/sqrt(cols)).
Tensor init_uniform_fanin(std::size_t rows, std::size_t cols, Rng& rng);

/// Adds "<prefix>.w" [out_dim x in_dim] and "<prefix>.b" [out_dim] (zeros).
void add_dense_params(ParamSet& params, std::string_view prefix, std::size_t out_dim,
                      std::size_t in_dim, Rng& rng);

/// Binds every parameter of a ParamSet into a graph as leaves, in insertion
/// order. With requires_grad=false the bound copies are plain constants, so a
/// backward pass skips them (used when differentiating w.r.t. inputs only).
class BoundParams {
 public:
  BoundParams(Graph& graph, const ParamSet& params, bool requires_grad = true);

  NodeId id(std::string_view name) const;
  bool trainable() const noexcept { return requires_grad_; }

  /// Gradients of every bound parameter after a backward pass. Parameters the
  /// root does not reach get zero tensors.
  GradMap grads() const;

 private:
  Graph* graph_;
  std::vector<std::pair<std::string, NodeId>> bound_;
  std::map<std::string, NodeId, std::less<>> ids_;
  bool requires_grad_;
};

/// matvec(<prefix>.w, x) + <prefix>.b
NodeId dense(Graph& g, const BoundParams& bp, std::string_view prefix, NodeId x);

/// Candidate-state wiring of the GRU cell. kStandard feeds the reset gate
/// into the candidate (the conventional cell); kPaper leaves the reset gate
/// computed but unused there.
enum class GruVariant { kStandard, kPaper };

GruVariant parse_gru_variant(std::string_view name);
std::string_view gru_variant_name(GruVariant variant) noexcept;

/// Adds "<prefix>.wz|uz|bz|wr|ur|br|wh|uh|bh". W* are [hidden x input],
/// U* are [hidden x hidden], biases are zero vectors.
void add_gru_params(ParamSet& params, std::string_view prefix, std::size_t input_dim,
                    std::size_t hidden_dim, Rng& rng);

struct GruNodeIds {
  NodeId wz, uz, bz;
  NodeId wr, ur, br;
  NodeId wh, uh, bh;
};

GruNodeIds bind_gru(const BoundParams& bp, std::string_view prefix);

/// One GRU step:
///   z = sigmoid(Wz x + Uz h_prev + bz)
///   r = sigmoid(Wr x + Ur h_prev + br)
///   hcand = tanh(Wh x + Uh (r o h_prev) + bh)   (kPaper: Uh h_prev)
///   h = (1 - z) o h_prev + z o hcand
NodeId gru_cell(Graph& g, const GruNodeIds& p, NodeId x, NodeId h_prev,
                GruVariant variant = GruVariant::kStandard);

}  // namespace advrec
