#include "advrec/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "advrec/errors.hpp"

namespace advrec {

namespace {

double sq_dist(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void require_uniform_dim(std::span<const Tensor> x, std::span<const Tensor> y) {
  if (x.empty() || y.empty()) throw StateError("mmd_rbf: empty sample set");
  std::size_t dim = x[0].size();
  for (const Tensor& v : x) {
    if (v.size() != dim) throw ShapeError("mmd_rbf: mixed dimensions in X");
  }
  for (const Tensor& v : y) {
    if (v.size() != dim) {
      throw ShapeError("mmd_rbf: Y dimension " + std::to_string(v.size()) + " vs X dimension " +
                       std::to_string(dim));
    }
  }
}

}  // namespace

MMDResult mmd_rbf(std::span<const Tensor> x, std::span<const Tensor> y, double gamma) {
  if (gamma <= 0.0) throw ConfigError("mmd_rbf: gamma must be positive");
  require_uniform_dim(x, y);

  auto mean_kernel = [gamma](std::span<const Tensor> a, std::span<const Tensor> b) {
    double s = 0.0;
    for (const Tensor& va : a) {
      for (const Tensor& vb : b) s += std::exp(-gamma * sq_dist(va, vb));
    }
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  };

  MMDResult result;
  result.gamma = gamma;
  result.n = x.size();
  result.m = y.size();
  result.value = mean_kernel(x, x) + mean_kernel(y, y) - 2.0 * mean_kernel(x, y);
  return result;
}

double median_heuristic_gamma(std::span<const Tensor> pool) {
  if (pool.size() < 2) throw StateError("median_heuristic_gamma: need at least 2 samples");
  std::size_t dim = pool[0].size();
  for (const Tensor& v : pool) {
    if (v.size() != dim) throw ShapeError("median_heuristic_gamma: mixed dimensions");
  }
  std::vector<double> dists;
  dists.reserve(pool.size() * (pool.size() - 1) / 2);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      dists.push_back(std::sqrt(sq_dist(pool[i], pool[j])));
    }
  }
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  double median = dists[dists.size() / 2];
  if (median == 0.0) throw NumericError("median_heuristic_gamma: degenerate pool (median 0)");
  return 1.0 / (2.0 * median * median);
}

}  // namespace advrec
