#include "advrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "advrec/errors.hpp"

namespace advrec {

MetricsReport topk_metrics(const std::vector<std::vector<std::size_t>>& rankings,
                           const std::vector<std::vector<std::size_t>>& relevant,
                           std::size_t k) {
  if (k < 1) throw ConfigError("topk_metrics: k must be at least 1");
  if (rankings.size() != relevant.size()) {
    throw ShapeError("topk_metrics: " + std::to_string(rankings.size()) + " rankings vs " +
                     std::to_string(relevant.size()) + " relevant sets");
  }

  MetricsReport report;
  report.k = k;
  std::size_t included = 0;
  for (std::size_t u = 0; u < rankings.size(); ++u) {
    std::size_t r_size = relevant[u].size();
    if (r_size == 0) continue;
    if (rankings[u].size() < k) {
      throw StateError("topk_metrics: ranking for user " + std::to_string(u) + " has " +
                       std::to_string(rankings[u].size()) + " entries, need " + std::to_string(k));
    }
    ++included;

    auto is_relevant = [&](std::size_t item) {
      return std::find(relevant[u].begin(), relevant[u].end(), item) != relevant[u].end();
    };
    std::size_t hits = 0;
    double dcg = 0.0;
    for (std::size_t rank = 1; rank <= k; ++rank) {
      if (is_relevant(rankings[u][rank - 1])) {
        ++hits;
        dcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
      }
    }
    double idcg = 0.0;
    for (std::size_t rank = 1; rank <= std::min(r_size, k); ++rank) {
      idcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
    }

    report.ndcg += dcg / idcg;
    report.recall += static_cast<double>(hits) / static_cast<double>(r_size);
    report.hit_ratio += hits > 0 ? 1.0 : 0.0;
    report.precision += static_cast<double>(hits) / static_cast<double>(k);
  }

  if (included == 0) throw StateError("topk_metrics: no users with relevant items");
  double n = static_cast<double>(included);
  report.ndcg /= n;
  report.recall /= n;
  report.hit_ratio /= n;
  report.precision /= n;
  return report;
}

}  // namespace advrec
