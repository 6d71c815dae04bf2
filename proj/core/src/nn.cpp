#include "advrec/nn.hpp"

#include <cmath>

#include "advrec/errors.hpp"

namespace advrec {

Tensor& ParamSet::add(std::string name, Tensor value) {
  auto [it, inserted] = values_.emplace(name, std::move(value));
  if (!inserted) throw StateError("parameter '" + name + "' already present");
  order_.push_back(std::move(name));
  return it->second;
}

bool ParamSet::has(std::string_view name) const noexcept {
  return values_.find(name) != values_.end();
}

Tensor& ParamSet::at(std::string_view name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw StateError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

const Tensor& ParamSet::at(std::string_view name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw StateError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

Tensor init_uniform_fanin(std::size_t rows, std::size_t cols, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Tensor w({rows, cols});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
  return w;
}

void add_dense_params(ParamSet& params, std::string_view prefix, std::size_t out_dim,
                      std::size_t in_dim, Rng& rng) {
  std::string p(prefix);
  params.add(p + ".w", init_uniform_fanin(out_dim, in_dim, rng));
  params.add(p + ".b", Tensor({out_dim}));
}

BoundParams::BoundParams(Graph& graph, const ParamSet& params, bool requires_grad)
    : graph_(&graph), requires_grad_(requires_grad) {
  bound_.reserve(params.size());
  for (const std::string& name : params.names()) {
    NodeId id = graph.leaf(params.at(name), requires_grad);
    bound_.emplace_back(name, id);
    ids_.emplace(name, id);
  }
}

NodeId BoundParams::id(std::string_view name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) throw StateError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

GradMap BoundParams::grads() const {
  if (!requires_grad_) throw StateError("grads: parameters were bound without gradients");
  GradMap out;
  for (const auto& [name, id] : bound_) out.emplace(name, graph_->grad(id));
  return out;
}

NodeId dense(Graph& g, const BoundParams& bp, std::string_view prefix, NodeId x) {
  std::string p(prefix);
  return g.add(g.matvec(bp.id(p + ".w"), x), bp.id(p + ".b"));
}

GruVariant parse_gru_variant(std::string_view name) {
  if (name == "standard") return GruVariant::kStandard;
  if (name == "paper") return GruVariant::kPaper;
  throw ConfigError("unknown gru_variant '" + std::string(name) + "' (expected standard|paper)");
}

std::string_view gru_variant_name(GruVariant variant) noexcept {
  return variant == GruVariant::kStandard ? "standard" : "paper";
}

void add_gru_params(ParamSet& params, std::string_view prefix, std::size_t input_dim,
                    std::size_t hidden_dim, Rng& rng) {
  std::string p(prefix);
  for (const char* gate : {"z", "r", "h"}) {
    params.add(p + ".w" + gate, init_uniform_fanin(hidden_dim, input_dim, rng));
    params.add(p + ".u" + gate, init_uniform_fanin(hidden_dim, hidden_dim, rng));
    params.add(p + ".b" + gate, Tensor({hidden_dim}));
  }
}

GruNodeIds bind_gru(const BoundParams& bp, std::string_view prefix) {
  std::string p(prefix);
  return GruNodeIds{
      bp.id(p + ".wz"), bp.id(p + ".uz"), bp.id(p + ".bz"),
      bp.id(p + ".wr"), bp.id(p + ".ur"), bp.id(p + ".br"),
      bp.id(p + ".wh"), bp.id(p + ".uh"), bp.id(p + ".bh"),
  };
}

NodeId gru_cell(Graph& g, const GruNodeIds& p, NodeId x, NodeId h_prev, GruVariant variant) {
  NodeId z = g.sigmoid(g.add(g.add(g.matvec(p.wz, x), g.matvec(p.uz, h_prev)), p.bz));
  NodeId r = g.sigmoid(g.add(g.add(g.matvec(p.wr, x), g.matvec(p.ur, h_prev)), p.br));
  NodeId carry = variant == GruVariant::kStandard ? g.mul(r, h_prev) : h_prev;
  NodeId hcand = g.tanh(g.add(g.add(g.matvec(p.wh, x), g.matvec(p.uh, carry)), p.bh));
  return g.add(g.mul(g.affine(z, -1.0, 1.0), h_prev), g.mul(z, hcand));
}

}  // namespace advrec
