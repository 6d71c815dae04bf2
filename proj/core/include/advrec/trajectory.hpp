#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "advrec/rng.hpp"
#include "advrec/tensor.hpp"
#include "advrec/world.hpp"

namespace advrec {

struct TrajectoryStep {
  Tensor state;        // the state the policy consumed (after any perturbation)
  std::size_t action;  // item id
  double reward = 0.0;  // always measured against the clean user vector
  Tensor policy_probs;
  bool attacked = false;
  double delta_norm = 0.0;  // l2 of the perturbation
};

struct Trajectory {
  std::size_t user = 0;
  std::vector<TrajectoryStep> steps;
};

/// Raw policy logits over all items for a given state.
using LogitsFn = std::function<Tensor(const Tensor& state)>;

/// Returns the state the policy should consume instead of the clean one, or
/// nullopt to leave the step clean.
using Perturber = std::function<std::optional<Tensor>(const Tensor& state, std::size_t step)>;

struct RolloutConfig {
  std::size_t path_length = 4;
  bool greedy = false;          // argmax at evaluation, sampled during training
  bool shaped_rewards = false;  // train_relevant items earn 1.0 instead of raw cosine
};

/// One episode: per step build the state, let the perturber replace it, mask
/// items already recommended this episode (logits to -inf), then sample or
/// argmax. Embeddings are never mutated.
Trajectory rollout(const LogitsFn& logits, const World& world, std::size_t user,
                   const RolloutConfig& config, Rng& rng, const Perturber& perturber = {});

/// All item ids sorted by pi(a|s1) at the user's empty-history state,
/// descending; ties break toward the lower item id.
std::vector<std::size_t> rank_items(const LogitsFn& logits, const World& world, std::size_t user);

/// JSONL persistence, one trajectory per line. `label` adds a top-level
/// binary field to every line (1 = adversarial).
void save_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories,
                       std::optional<int> label = std::nullopt);

struct TrajectoryFile {
  std::vector<Trajectory> trajectories;
  std::vector<int> labels;  // empty when the file has no label fields
};

TrajectoryFile load_trajectories(const std::filesystem::path& path);

}  // namespace advrec
