#pragma once

#include <cstdint>
#include <vector>

#include "advrec/embedding.hpp"
#include "advrec/tensor.hpp"

namespace advrec {

struct WorldConfig {
  std::size_t n_users = 200;
  std::size_t n_items = 500;
  std::size_t dim = 16;
  std::size_t latent_clusters = 8;
  std::size_t relevant_per_user = 5;
  double noise = 0.25;
  std::uint64_t seed = 0;
};

/// relevant[u] is held out for ranking metrics; train_relevant[u] shapes the
/// training reward. The two are disjoint per user by construction.
struct World {
  EmbeddingTable table;
  std::vector<std::vector<std::size_t>> relevant;
  std::vector<std::vector<std::size_t>> train_relevant;
};

/// Users and items share latent cluster centers (standard normal) plus
/// per-vector noise, then are L2-normalized. Per user, the top
/// 2*relevant_per_user items by cosine split alternating by rank: even ranks
/// feed train_relevant, odd ranks the held-out relevant set.
World generate_world(const WorldConfig& config);

/// Builds a world around an existing table (e.g. loaded embeddings), deriving
/// the relevant splits with the same alternating cosine-rank rule.
World world_from_table(EmbeddingTable table, std::size_t relevant_per_user);

/// Cosine similarity; the reward signal of the environment.
double reward(const Tensor& user_vec, const Tensor& item_vec);

/// [user_vec || mean(history)], with a zero second half for empty history.
Tensor build_state(const Tensor& user_vec, const std::vector<Tensor>& history);

}  // namespace advrec
