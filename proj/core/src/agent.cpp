#include "advrec/agent.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>

#include "advrec/adam.hpp"
#include "advrec/checkpoint.hpp"
#include "advrec/errors.hpp"
#include "advrec/metrics.hpp"
#include "advrec/rng.hpp"

namespace advrec {

namespace {

void validate_algo(const std::string& algo) {
  if (algo != "actor_critic" && algo != "reinforce") {
    throw ConfigError("unknown algo '" + algo + "' (expected actor_critic|reinforce)");
  }
}

Tensor mask_vector(std::size_t n_items, const std::vector<char>& used) {
  Tensor mask({n_items});
  for (std::size_t i = 0; i < n_items; ++i) {
    if (used[i]) mask[i] = -std::numeric_limits<double>::infinity();
  }
  return mask;
}

// One optimizer step from one episode. Returns the scalar loss.
double update_from_episode(Agent& agent, const Trajectory& traj, const World& world,
                           const TrainConfig& cfg, AdamState& opt) {
  std::size_t T = traj.steps.size();
  Graph g;
  BoundParams bp(g, agent.params, true);

  // Value estimates Q(s_t, a_t), built first so targets can read them.
  std::vector<NodeId> q_nodes(T);
  for (std::size_t t = 0; t < T; ++t) {
    NodeId state = g.constant(traj.steps[t].state);
    NodeId item = g.constant(world.table.items[traj.steps[t].action]);
    q_nodes[t] = q_value_node(g, bp, state, item);
  }

  // Per-step actor weights and critic targets, all treated as constants.
  std::vector<double> targets(T), weights(T);
  if (cfg.algo == "reinforce") {
    double ret = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      ret = traj.steps[t].reward + cfg.gamma * ret;
      targets[t] = ret;
      weights[t] = ret - g.scalar(q_nodes[t]);
    }
  } else {
    for (std::size_t t = 0; t < T; ++t) {
      double bootstrap = t + 1 < T ? g.scalar(q_nodes[t + 1]) : 0.0;
      targets[t] = traj.steps[t].reward + cfg.gamma * bootstrap;
      weights[t] = targets[t] - g.scalar(q_nodes[t]);
    }
  }

  NodeId critic_sum = kNoNode;
  NodeId actor_sum = kNoNode;
  std::vector<char> used(agent.n_items, 0);
  for (std::size_t t = 0; t < T; ++t) {
    NodeId diff = g.sub(q_nodes[t], g.constant(Tensor::scalar(targets[t])));
    NodeId sq = g.mul(diff, diff);
    critic_sum = critic_sum == kNoNode ? sq : g.add(critic_sum, sq);

    NodeId state = g.constant(traj.steps[t].state);
    NodeId masked = g.add(policy_logits_node(g, bp, state),
                          g.constant(mask_vector(agent.n_items, used)));
    NodeId logp = g.log(g.pick(g.softmax(masked), traj.steps[t].action));
    NodeId weighted = g.affine(logp, weights[t], 0.0);
    actor_sum = actor_sum == kNoNode ? weighted : g.add(actor_sum, weighted);
    used[traj.steps[t].action] = 1;
  }

  double inv_t = 1.0 / static_cast<double>(T);
  NodeId loss = g.add(g.affine(critic_sum, inv_t, 0.0), g.affine(actor_sum, -inv_t, 0.0));
  g.backward(loss);
  adam_step(agent.params, bp.grads(), opt);
  return g.scalar(loss);
}

}  // namespace

Agent make_agent(std::size_t n_items, std::size_t state_dim, std::size_t item_dim,
                 std::size_t hidden, std::string algo, std::uint64_t seed) {
  validate_algo(algo);
  if (n_items == 0 || state_dim == 0 || item_dim == 0 || hidden == 0) {
    throw ConfigError("make_agent: all dimensions must be positive");
  }
  Agent agent;
  agent.n_items = n_items;
  agent.state_dim = state_dim;
  agent.item_dim = item_dim;
  agent.hidden = hidden;
  agent.algo = std::move(algo);
  Rng rng(seed);
  add_dense_params(agent.params, "policy.l1", hidden, state_dim, rng);
  add_dense_params(agent.params, "policy.l2", n_items, hidden, rng);
  add_dense_params(agent.params, "value.l1", hidden, state_dim + item_dim, rng);
  add_dense_params(agent.params, "value.l2", 1, hidden, rng);
  return agent;
}

NodeId policy_logits_node(Graph& g, const BoundParams& bp, NodeId state) {
  return dense(g, bp, "policy.l2", g.relu(dense(g, bp, "policy.l1", state)));
}

NodeId q_value_node(Graph& g, const BoundParams& bp, NodeId state, NodeId item) {
  NodeId x = g.concat(state, item);
  return g.pick(dense(g, bp, "value.l2", g.relu(dense(g, bp, "value.l1", x))), 0);
}

Tensor policy_logits(const Agent& agent, const Tensor& state) {
  Graph g;
  BoundParams bp(g, agent.params, false);
  return g.value(policy_logits_node(g, bp, g.leaf(state)));
}

Tensor policy_forward(const Agent& agent, const Tensor& state) {
  return softmax(policy_logits(agent, state));
}

double q_forward(const Agent& agent, const Tensor& state, const Tensor& item_vec) {
  Graph g;
  BoundParams bp(g, agent.params, false);
  return g.scalar(q_value_node(g, bp, g.leaf(state), g.leaf(item_vec)));
}

LogitsFn agent_logits_fn(const Agent& agent) {
  return [&agent](const Tensor& state) { return policy_logits(agent, state); };
}

std::pair<Agent, TrainReport> train_agent(const World& world, const TrainConfig& config) {
  if (config.gamma < 0.0 || config.gamma > 1.0) {
    throw ConfigError("train_agent: gamma must lie in [0,1]");
  }
  if (config.epochs == 0) throw ConfigError("train_agent: epochs must be positive");
  validate_algo(config.algo);

  std::size_t dim = world.table.dim;
  Agent agent = make_agent(world.table.items.size(), 2 * dim, dim, config.hidden, config.algo,
                           derive_seed(config.seed, "agent-init"));
  AdamState opt;
  opt.lr = config.lr;
  opt.weight_decay = config.weight_decay;

  std::size_t per_epoch =
      config.episodes_per_epoch ? config.episodes_per_epoch : world.table.users.size();
  RolloutConfig rc{.path_length = config.path_length, .greedy = false, .shaped_rewards = true};
  LogitsFn logits = agent_logits_fn(agent);

  TrainReport report;
  std::size_t episode_no = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_reward = 0.0;
    for (std::size_t e = 0; e < per_epoch; ++e, ++episode_no) {
      std::size_t user = episode_no % world.table.users.size();
      Rng rng(derive_seed(config.seed, "episode", episode_no));
      Trajectory traj = rollout(logits, world, user, rc, rng);
      double mean_r = 0.0;
      for (const TrajectoryStep& s : traj.steps) mean_r += s.reward;
      epoch_reward += mean_r / static_cast<double>(traj.steps.size());

      double loss;
      try {
        loss = update_from_episode(agent, traj, world, config, opt);
      } catch (const NumericError& e) {
        throw NumericError("train_agent: diverged at epoch " + std::to_string(epoch) + ": " +
                           e.what());
      }
      if (!std::isfinite(loss)) {
        throw NumericError("train_agent: diverged at epoch " + std::to_string(epoch));
      }
    }
    report.mean_reward_curve.push_back(epoch_reward / static_cast<double>(per_epoch));
  }
  report.episodes = episode_no;

  std::vector<std::vector<std::size_t>> rankings;
  rankings.reserve(world.table.users.size());
  for (std::size_t u = 0; u < world.table.users.size(); ++u) {
    rankings.push_back(rank_items(logits, world, u));
  }
  report.final_ndcg10 = topk_metrics(rankings, world.relevant, 10).ndcg;
  return {std::move(agent), std::move(report)};
}

void save_agent(const std::filesystem::path& path, const Agent& agent) {
  Checkpoint ck;
  ck.kind = "agent";
  nlohmann::ordered_json cfg;
  cfg["n_items"] = agent.n_items;
  cfg["state_dim"] = agent.state_dim;
  cfg["item_dim"] = agent.item_dim;
  cfg["hidden"] = agent.hidden;
  cfg["algo"] = agent.algo;
  ck.config_json = cfg.dump();
  ck.params = agent.params;
  save_checkpoint(path, ck);
}

Agent load_agent(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path, "agent");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(ck.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path.string() + "': bad agent config: " + e.what());
  }
  for (const char* key : {"n_items", "state_dim", "item_dim", "hidden", "algo"}) {
    if (!cfg.contains(key)) {
      throw ParseError("'" + path.string() + "': agent config missing '" + std::string(key) + "'");
    }
  }

  Agent agent;
  agent.n_items = cfg["n_items"].get<std::size_t>();
  agent.state_dim = cfg["state_dim"].get<std::size_t>();
  agent.item_dim = cfg["item_dim"].get<std::size_t>();
  agent.hidden = cfg["hidden"].get<std::size_t>();
  agent.algo = cfg["algo"].get<std::string>();
  validate_algo(agent.algo);
  agent.params = std::move(ck.params);

  auto expect = [&](const char* name, Shape shape) {
    if (!agent.params.has(name) || !(agent.params.at(name).shape() == shape)) {
      throw ParseError("'" + path.string() + "': parameter '" + std::string(name) +
                       "' missing or mis-shaped");
    }
  };
  expect("policy.l1.w", {agent.hidden, agent.state_dim});
  expect("policy.l1.b", {agent.hidden});
  expect("policy.l2.w", {agent.n_items, agent.hidden});
  expect("policy.l2.b", {agent.n_items});
  expect("value.l1.w", {agent.hidden, agent.state_dim + agent.item_dim});
  expect("value.l1.b", {agent.hidden});
  expect("value.l2.w", {1, agent.hidden});
  expect("value.l2.b", {1});
  return agent;
}

}  // namespace advrec
