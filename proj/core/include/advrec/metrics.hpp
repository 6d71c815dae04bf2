#pragma once

#include <cstddef>
#include <vector>

namespace advrec {

/// Macro-averaged top-k ranking quality over users with non-empty relevant
/// sets. All four values live in [0,1]; precision <= hit_ratio.
struct MetricsReport {
  double ndcg = 0.0;
  double recall = 0.0;
  double hit_ratio = 0.0;
  double precision = 0.0;
  std::size_t k = 10;
};

/// Binary-gain NDCG with 1/log2(rank+1) discount, Recall, HR, Precision at
/// cutoff k. Users whose relevant set is empty are excluded from the average.
MetricsReport topk_metrics(const std::vector<std::vector<std::size_t>>& rankings,
                           const std::vector<std::vector<std::size_t>>& relevant,
                           std::size_t k = 10);

}  // namespace advrec
