#include <algorithm>
#include <cmath>
#include <doctest.h>
#include <set>

#include "advrec/errors.hpp"
#include "advrec/metrics.hpp"
#include "advrec/rng.hpp"

using namespace advrec;

namespace {

// Independent re-derivation used as the oracle for topk_metrics.
struct Naive {
  double ndcg = 0, recall = 0, hr = 0, precision = 0;
};

Naive naive_metrics(const std::vector<std::vector<std::size_t>>& rankings,
                    const std::vector<std::vector<std::size_t>>& relevant, std::size_t k) {
  Naive out;
  std::size_t counted = 0;
  for (std::size_t u = 0; u < rankings.size(); ++u) {
    std::set<std::size_t> rel(relevant[u].begin(), relevant[u].end());
    if (rel.empty()) continue;
    ++counted;
    double dcg = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (rel.count(rankings[u][i])) {
        ++hits;
        dcg += 1.0 / std::log2(i + 2.0);
      }
    }
    double idcg = 0;
    for (std::size_t i = 0; i < std::min(rel.size(), k); ++i) idcg += 1.0 / std::log2(i + 2.0);
    out.ndcg += dcg / idcg;
    out.recall += double(hits) / double(rel.size());
    out.hr += hits ? 1 : 0;
    out.precision += double(hits) / double(k);
  }
  out.ndcg /= counted;
  out.recall /= counted;
  out.hr /= counted;
  out.precision /= counted;
  return out;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("topk: perfect single hit at rank 1") {
  std::vector<std::vector<std::size_t>> ranking = {{5, 1, 2, 3, 4, 6, 7, 8, 9, 0}};
  MetricsReport r = topk_metrics(ranking, {{5}}, 10);
  CHECK(r.ndcg == doctest::Approx(1.0));
  CHECK(r.recall == doctest::Approx(1.0));
  CHECK(r.hit_ratio == doctest::Approx(1.0));
  CHECK(r.precision == doctest::Approx(0.1));
}

TEST_CASE("topk: no hits zeroes every metric") {
  std::vector<std::vector<std::size_t>> ranking = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  MetricsReport r = topk_metrics(ranking, {{99}}, 10);
  CHECK(r.ndcg == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.hit_ratio == 0.0);
  CHECK(r.precision == 0.0);
}

TEST_CASE("topk: hits at ranks 2 and 3 with R=2") {
  std::vector<std::vector<std::size_t>> ranking = {{0, 50, 51, 3, 4, 5, 6, 7, 8, 9}};
  MetricsReport r = topk_metrics(ranking, {{50, 51}}, 10);
  double dcg = 1.0 / std::log2(3.0) + 1.0 / std::log2(4.0);
  double idcg = 1.0 + 1.0 / std::log2(3.0);
  CHECK(dcg == doctest::Approx(1.1309).epsilon(1e-4));
  CHECK(idcg == doctest::Approx(1.6309).epsilon(1e-4));
  CHECK(r.ndcg == doctest::Approx(dcg / idcg));
  CHECK(r.ndcg == doctest::Approx(0.6934).epsilon(1e-4));
  CHECK(r.recall == doctest::Approx(1.0));
  CHECK(r.hit_ratio == doctest::Approx(1.0));
  CHECK(r.precision == doctest::Approx(0.2));
}

TEST_CASE("topk: users without relevant items are excluded") {
  std::vector<std::vector<std::size_t>> rankings = {{5, 1, 2, 3, 4, 6, 7, 8, 9, 0},
                                                    {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  MetricsReport r = topk_metrics(rankings, {{5}, {}}, 10);
  CHECK(r.ndcg == doctest::Approx(1.0));  // the empty user does not dilute
  CHECK_THROWS_AS(topk_metrics(rankings, {{}, {}}, 10), StateError);
}

TEST_CASE("topk: validation errors") {
  CHECK_THROWS_AS(topk_metrics({{0, 1}}, {{0}}, 0), ConfigError);
  CHECK_THROWS_AS(topk_metrics({{0, 1}}, {{0}}, 3), StateError);  // list shorter than k
  CHECK_THROWS_AS(topk_metrics({{0, 1}}, {{0}, {1}}, 1), ShapeError);
}

TEST_CASE("topk: NDCG ignores order below the cutoff") {
  std::vector<std::size_t> base = {9, 0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 11, 12};
  std::vector<std::size_t> shuffled_tail = {9, 0, 1, 2, 3, 4, 5, 6, 7, 8, 12, 10, 11};
  MetricsReport a = topk_metrics({base}, {{9, 11}}, 10);
  MetricsReport b = topk_metrics({shuffled_tail}, {{9, 11}}, 10);
  CHECK(a.ndcg == b.ndcg);
}

TEST_CASE("topk: matches an independent recomputation on random instances") {
  Rng rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t n_items = 12 + rng.uniform_int(8);
    std::size_t n_users = 1 + rng.uniform_int(6);
    std::size_t k = 1 + rng.uniform_int(n_items - 1);
    std::vector<std::vector<std::size_t>> rankings, relevant;
    bool any_relevant = false;
    for (std::size_t u = 0; u < n_users; ++u) {
      rankings.push_back(rng.permutation(n_items));
      std::vector<std::size_t> rel;
      for (std::size_t i = 0; i < n_items; ++i) {
        if (rng.bernoulli(0.2)) rel.push_back(i);
      }
      any_relevant |= !rel.empty();
      relevant.push_back(std::move(rel));
    }
    if (!any_relevant) relevant[0].push_back(0);

    MetricsReport fast = topk_metrics(rankings, relevant, k);
    Naive slow = naive_metrics(rankings, relevant, k);
    CHECK(fast.ndcg == doctest::Approx(slow.ndcg).epsilon(1e-12));
    CHECK(fast.recall == doctest::Approx(slow.recall).epsilon(1e-12));
    CHECK(fast.hit_ratio == doctest::Approx(slow.hr).epsilon(1e-12));
    CHECK(fast.precision == doctest::Approx(slow.precision).epsilon(1e-12));
    CHECK(fast.precision <= fast.hit_ratio + 1e-12);
  }
}

}
