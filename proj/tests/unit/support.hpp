#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "advrec/graph.hpp"
#include "advrec/tensor.hpp"

namespace advrec::testing {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

/// Compares reverse-mode gradients against central finite differences.
/// `build` reconstructs the computation from scratch for each probe:
/// it receives a fresh graph plus leaf node ids for `inputs` (in order,
/// requires_grad=true) and returns the scalar root. Returns the max
/// relative error over every entry of every input.
template <typename Builder>
double max_grad_rel_err(Builder&& build, const std::vector<Tensor>& inputs, double h = 1e-5) {
  Graph g;
  std::vector<NodeId> ids;
  ids.reserve(inputs.size());
  for (const Tensor& x : inputs) ids.push_back(g.leaf(x, true));
  NodeId root = build(g, ids);
  g.backward(root);
  std::vector<Tensor> analytic;
  analytic.reserve(inputs.size());
  for (NodeId id : ids) analytic.push_back(g.grad(id));

  auto value_at = [&](const std::vector<Tensor>& xs) {
    Graph fg;
    std::vector<NodeId> fids;
    fids.reserve(xs.size());
    for (const Tensor& x : xs) fids.push_back(fg.leaf(x, true));
    return fg.scalar(build(fg, fids));
  };

  double worst = 0.0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      double orig = probe[k][i];
      probe[k][i] = orig + h;
      double up = value_at(probe);
      probe[k][i] = orig - h;
      double down = value_at(probe);
      probe[k][i] = orig;
      double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, rel_err(analytic[k][i], fd));
    }
  }
  return worst;
}

}  // namespace advrec::testing
