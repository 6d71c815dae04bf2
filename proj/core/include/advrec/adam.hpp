#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "advrec/nn.hpp"
#include "advrec/tensor.hpp"

namespace advrec {

/// Adam with decoupled weight decay. Moment tensors are created lazily with
/// the shape of the parameter they track; step counts whole update calls.
struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_stab = 1e-8;
  double weight_decay = 0.01;
  std::uint64_t step = 0;
  std::map<std::string, Tensor, std::less<>> m;
  std::map<std::string, Tensor, std::less<>> v;
};

/// One optimizer step over every parameter, in ParamSet order. Parameters
/// missing from `grads` see a zero gradient (decay still applies). Decay runs
/// before the bias-corrected Adam delta: p <- p * (1 - lr * wd) - lr * mhat /
/// (sqrt(vhat) + eps).
void adam_step(ParamSet& params, const GradMap& grads, AdamState& state);

}  // namespace advrec
