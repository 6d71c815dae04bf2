#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "advrec/graph.hpp"
#include "advrec/nn.hpp"
#include "advrec/tensor.hpp"
#include "advrec/trajectory.hpp"
#include "advrec/world.hpp"

namespace advrec {

/// Policy: state -> hidden -> n_items logits. Value: [state||item] -> hidden
/// -> scalar. Both single-hidden-layer ReLU MLPs.
struct Agent {
  std::size_t n_items = 0;
  std::size_t state_dim = 0;
  std::size_t item_dim = 0;
  std::size_t hidden = 64;
  std::string algo = "actor_critic";  // or "reinforce"
  ParamSet params;
};

Agent make_agent(std::size_t n_items, std::size_t state_dim, std::size_t item_dim,
                 std::size_t hidden, std::string algo, std::uint64_t seed);

/// Graph builders shared by training and attack crafting.
NodeId policy_logits_node(Graph& g, const BoundParams& bp, NodeId state);
NodeId q_value_node(Graph& g, const BoundParams& bp, NodeId state, NodeId item);

Tensor policy_logits(const Agent& agent, const Tensor& state);
/// Softmax over the full logit vector (no episode masking).
Tensor policy_forward(const Agent& agent, const Tensor& state);
double q_forward(const Agent& agent, const Tensor& state, const Tensor& item_vec);

/// Bridge into env::rollout. Captures the agent by reference.
LogitsFn agent_logits_fn(const Agent& agent);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t episodes_per_epoch = 0;  // 0: one episode per user per epoch
  double gamma = 0.9;
  double lr = 5e-4;
  double weight_decay = 0.01;
  std::size_t hidden = 64;
  std::size_t path_length = 4;
  std::string algo = "actor_critic";
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::size_t episodes = 0;
  std::vector<double> mean_reward_curve;  // one entry per epoch
  double final_ndcg10 = 0.0;
};

/// Actor-critic with TD(0) (default): the critic regresses Q(s_t,a_t) onto
/// r_t + gamma*Q(s_{t+1},a_{t+1}) (terminal bootstrap 0) and the actor
/// ascends log pi(a_t|s_t) weighted by the TD advantage, which is frozen
/// during the actor update. "reinforce" swaps the critic target and the
/// actor weight for the discounted episode return, with the value network
/// as baseline. Rewards are shaped: train_relevant items earn 1.0.
std::pair<Agent, TrainReport> train_agent(const World& world, const TrainConfig& config);

void save_agent(const std::filesystem::path& path, const Agent& agent);
Agent load_agent(const std::filesystem::path& path);

}  // namespace advrec
