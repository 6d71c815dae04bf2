#include <algorithm>
#include <doctest.h>

#include "advrec/errors.hpp"
#include "advrec/rng.hpp"
#include "advrec/tensor.hpp"

using namespace advrec;

TEST_SUITE("ndiff") {

TEST_CASE("tensor: shape bookkeeping and validation") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rank() == 2);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at2(1, 2) == 6);
  CHECK(t.size() == 6);
  CHECK(shape_str(t.shape()) == "[2x3]");
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::vec({1, 2}).rows(), ShapeError);
}

TEST_CASE("tensor: norms, argmax, finiteness") {
  Tensor t = Tensor::vec({3, -4, 0});
  CHECK(t.l1_norm() == 7.0);
  CHECK(t.l2_norm() == doctest::Approx(5.0));
  CHECK(t.linf_norm() == 4.0);
  CHECK(t.sum() == -1.0);
  CHECK(Tensor::vec({1, 5, 5, 2}).argmax() == 1);
  CHECK(t.all_finite());
  t[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
  CHECK(dot(Tensor::vec({1, 2}).data(), Tensor::vec({3, 4}).data()) == 11.0);
}

TEST_CASE("rng: identical seeds replay, distinct labels diverge") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  CHECK(derive_seed(7, "alpha") != derive_seed(7, "beta"));
  CHECK(derive_seed(7, "alpha", 0) != derive_seed(7, "alpha", 1));
  CHECK(derive_seed(7, "alpha", 3) == derive_seed(7, "alpha", 3));
}

TEST_CASE("rng: uniform stays in [0,1) and uniform_int in range") {
  Rng r(5);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    std::uint64_t v = r.uniform_int(7);
    CHECK(v < 7);
  }
  CHECK_THROWS_AS(r.uniform_int(0), StateError);
}

TEST_CASE("rng: normal has roughly standard moments") {
  Rng r(17);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng: permutation is a bijection") {
  Rng r(23);
  std::vector<std::size_t> perm = r.permutation(50);
  std::vector<std::size_t> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

}
