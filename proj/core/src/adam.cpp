#include "advrec/adam.hpp"

#include <cmath>

#include "advrec/errors.hpp"

namespace advrec {

void adam_step(ParamSet& params, const GradMap& grads, AdamState& state) {
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  double decay = 1.0 - state.lr * state.weight_decay;

  for (const std::string& name : params.names()) {
    Tensor& p = params.at(name);
    const Tensor* g = nullptr;
    if (auto it = grads.find(name); it != grads.end()) {
      g = &it->second;
      if (!g->same_shape(p)) {
        throw ShapeError("adam_step: gradient for '" + name + "' has shape " +
                         shape_str(g->shape()) + ", parameter has " + shape_str(p.shape()));
      }
      if (!g->all_finite()) throw NumericError("adam_step: non-finite gradient for '" + name + "'");
    }

    Tensor& m = state.m.try_emplace(name, Tensor(p.shape())).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor(p.shape())).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      double gi = g ? (*g)[i] : 0.0;
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] = p[i] * decay - state.lr * mhat / (std::sqrt(vhat) + state.eps_stab);
    }
  }
}

}  // namespace advrec
