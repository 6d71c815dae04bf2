#include "advrec/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advrec/errors.hpp"
#include "advrec/rng.hpp"

namespace advrec {

namespace {

Tensor clustered_vector(const std::vector<Tensor>& centers, double noise, std::size_t dim,
                        Rng& rng) {
  const Tensor& center = centers[rng.uniform_int(centers.size())];
  Tensor v({dim});
  for (std::size_t i = 0; i < dim; ++i) v[i] = center[i] + noise * rng.normal();
  double norm = v.l2_norm();
  if (norm == 0.0) throw NumericError("generate_world: drew a zero vector");
  for (std::size_t i = 0; i < dim; ++i) v[i] /= norm;
  return v;
}

/// Even cosine ranks feed train_relevant, odd ranks the held-out relevant.
void split_relevant(World& world, std::size_t relevant_per_user) {
  const std::size_t n_users = world.table.users.size();
  const std::size_t n_items = world.table.items.size();
  const std::size_t top = 2 * relevant_per_user;
  world.relevant.assign(n_users, {});
  world.train_relevant.assign(n_users, {});
  std::vector<std::size_t> order(n_items);
  for (std::size_t u = 0; u < n_users; ++u) {
    const Tensor& uv = world.table.users[u];
    std::vector<double> sim(n_items);
    for (std::size_t i = 0; i < n_items; ++i) sim[i] = reward(uv, world.table.items[i]);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
    for (std::size_t r = 0; r < top; ++r) {
      (r % 2 == 0 ? world.train_relevant : world.relevant)[u].push_back(order[r]);
    }
  }
}

}  // namespace

World generate_world(const WorldConfig& config) {
  if (config.dim < 2) throw ConfigError("generate_world: dim must be at least 2");
  if (config.latent_clusters < 1) throw ConfigError("generate_world: latent_clusters must be positive");
  if (config.relevant_per_user < 1) {
    throw ConfigError("generate_world: relevant_per_user must be positive");
  }
  if (config.n_items <= 2 * config.relevant_per_user) {
    throw ConfigError("generate_world: n_items must exceed 2*relevant_per_user");
  }
  if (config.n_users < 1) throw ConfigError("generate_world: n_users must be positive");
  if (config.noise < 0.0) throw ConfigError("generate_world: noise must be non-negative");

  Rng rng(derive_seed(config.seed, "world"));
  std::vector<Tensor> centers;
  centers.reserve(config.latent_clusters);
  for (std::size_t c = 0; c < config.latent_clusters; ++c) {
    Tensor center({config.dim});
    for (std::size_t i = 0; i < config.dim; ++i) center[i] = rng.normal();
    centers.push_back(std::move(center));
  }

  World world;
  world.table.dim = config.dim;
  for (std::size_t u = 0; u < config.n_users; ++u) {
    world.table.users.push_back(clustered_vector(centers, config.noise, config.dim, rng));
    world.table.user_ids.push_back(std::to_string(u));
  }
  for (std::size_t i = 0; i < config.n_items; ++i) {
    world.table.items.push_back(clustered_vector(centers, config.noise, config.dim, rng));
    world.table.item_ids.push_back(std::to_string(i));
  }

  split_relevant(world, config.relevant_per_user);
  return world;
}

World world_from_table(EmbeddingTable table, std::size_t relevant_per_user) {
  if (relevant_per_user < 1) {
    throw ConfigError("world_from_table: relevant_per_user must be positive");
  }
  if (table.users.empty()) throw ConfigError("world_from_table: table has no users");
  if (table.items.size() <= 2 * relevant_per_user) {
    throw ConfigError("world_from_table: item count must exceed 2*relevant_per_user");
  }
  World world;
  world.table = std::move(table);
  split_relevant(world, relevant_per_user);
  return world;
}

double reward(const Tensor& user_vec, const Tensor& item_vec) {
  double nu = user_vec.l2_norm(), ni = item_vec.l2_norm();
  if (nu == 0.0 || ni == 0.0) throw NumericError("reward: cosine undefined for zero vector");
  return dot(user_vec.data(), item_vec.data()) / (nu * ni);
}

Tensor build_state(const Tensor& user_vec, const std::vector<Tensor>& history) {
  std::size_t dim = user_vec.size();
  Tensor state({2 * dim});
  for (std::size_t i = 0; i < dim; ++i) state[i] = user_vec[i];
  if (!history.empty()) {
    for (const Tensor& v : history) {
      if (v.size() != dim) {
        throw ShapeError("build_state: history vector " + shape_str(v.shape()) +
                         " does not match user dim " + std::to_string(dim));
      }
      for (std::size_t i = 0; i < dim; ++i) state[dim + i] += v[i];
    }
    for (std::size_t i = 0; i < dim; ++i) state[dim + i] /= static_cast<double>(history.size());
  }
  return state;
}

}  // namespace advrec
