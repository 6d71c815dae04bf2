#pragma once

#include <span>

#include "advrec/tensor.hpp"

namespace advrec {

struct MMDResult {
  double value = 0.0;  // biased squared-MMD estimate, >= -1e-9
  double gamma = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
};

/// Biased squared-MMD with RBF kernel k(a,b) = exp(-gamma*|a-b|_2^2):
/// mean_xx + mean_yy - 2*mean_xy, diagonals included.
MMDResult mmd_rbf(std::span<const Tensor> x, std::span<const Tensor> y, double gamma);

/// Median heuristic: gamma = 1/(2*median^2) over pairwise l2 distances of the
/// pool. Throws NumericError when the pool is degenerate (median 0).
double median_heuristic_gamma(std::span<const Tensor> pool);

}  // namespace advrec
