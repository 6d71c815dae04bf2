#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace advrec {

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent stream seed from a base seed, a stage label and an
/// index (e.g. a user id). Every source of randomness in the pipeline flows
/// from the single top-level seed through this function.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0);

/// Deterministic RNG: a mt19937_64 engine (bit-exact per the standard) with
/// hand-rolled distribution transforms, since the standard library's
/// distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; caches the spare draw.
  double normal();

  /// Uniform integer in [0, n); rejection-sampled so every value is equally likely.
  std::uint64_t uniform_int(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  std::vector<std::size_t> permutation(std::size_t n);

  Rng fork(std::string_view label, std::uint64_t index = 0) {
    return Rng(derive_seed(next_u64(), label, index));
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace advrec
