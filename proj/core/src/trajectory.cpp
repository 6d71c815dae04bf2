#include "advrec/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "advrec/errors.hpp"

namespace advrec {

namespace {

using ordered_json = nlohmann::ordered_json;

bool contains(const std::vector<std::size_t>& xs, std::size_t x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

ordered_json vec_json(const Tensor& t) {
  ordered_json arr = ordered_json::array();
  for (std::size_t i = 0; i < t.size(); ++i) arr.push_back(t[i]);
  return arr;
}

Tensor vec_from_json(const ordered_json& arr, const std::string& where) {
  if (!arr.is_array() || arr.empty()) throw ParseError(where + ": expected a non-empty array");
  std::vector<double> values;
  values.reserve(arr.size());
  for (const auto& e : arr) {
    if (!e.is_number()) throw ParseError(where + ": non-numeric entry");
    values.push_back(e.get<double>());
  }
  return Tensor::vec(std::move(values));
}

}  // namespace

Trajectory rollout(const LogitsFn& logits, const World& world, std::size_t user,
                   const RolloutConfig& config, Rng& rng, const Perturber& perturber) {
  std::size_t n_items = world.table.items.size();
  if (n_items < config.path_length) {
    throw ConfigError("rollout: path length " + std::to_string(config.path_length) +
                      " exceeds item count " + std::to_string(n_items));
  }
  if (user >= world.table.users.size()) {
    throw StateError("rollout: user " + std::to_string(user) + " out of range");
  }
  const Tensor& user_vec = world.table.users[user];

  Trajectory traj;
  traj.user = user;
  traj.steps.reserve(config.path_length);
  std::vector<Tensor> history;
  std::vector<char> used(n_items, 0);

  for (std::size_t t = 0; t < config.path_length; ++t) {
    Tensor clean = build_state(user_vec, history);
    Tensor state = clean;
    bool attacked = false;
    double delta_norm = 0.0;
    if (perturber) {
      if (std::optional<Tensor> hit = perturber(clean, t)) {
        if (!hit->same_shape(clean)) {
          throw ShapeError("rollout: perturbed state " + shape_str(hit->shape()) +
                           " does not match " + shape_str(clean.shape()));
        }
        state = std::move(*hit);
        attacked = true;
        double sq = 0.0;
        for (std::size_t i = 0; i < state.size(); ++i) {
          double d = state[i] - clean[i];
          sq += d * d;
        }
        delta_norm = std::sqrt(sq);
      }
    }

    Tensor masked = logits(state);
    if (masked.size() != n_items) {
      throw ShapeError("rollout: policy produced " + shape_str(masked.shape()) + " for " +
                       std::to_string(n_items) + " items");
    }
    for (std::size_t i = 0; i < n_items; ++i) {
      if (used[i]) masked[i] = -std::numeric_limits<double>::infinity();
    }
    Tensor probs = softmax(masked);

    std::size_t action;
    if (config.greedy) {
      action = probs.argmax();
    } else {
      double r = rng.uniform();
      double cum = 0.0;
      action = n_items;  // sentinel
      for (std::size_t i = 0; i < n_items; ++i) {
        cum += probs[i];
        if (r < cum) {
          action = i;
          break;
        }
      }
      if (action == n_items) {  // rounding spill: take the last viable item
        for (std::size_t i = n_items; i-- > 0;) {
          if (!used[i]) {
            action = i;
            break;
          }
        }
      }
    }

    const Tensor& item_vec = world.table.items[action];
    double r = config.shaped_rewards && contains(world.train_relevant[user], action)
                   ? 1.0
                   : reward(user_vec, item_vec);
    traj.steps.push_back({std::move(state), action, r, std::move(probs), attacked, delta_norm});
    history.push_back(item_vec);
    used[action] = 1;
  }
  return traj;
}

std::vector<std::size_t> rank_items(const LogitsFn& logits, const World& world, std::size_t user) {
  if (user >= world.table.users.size()) {
    throw StateError("rank_items: user " + std::to_string(user) + " out of range");
  }
  Tensor state = build_state(world.table.users[user], {});
  Tensor probs = softmax(logits(state));
  if (probs.size() != world.table.items.size()) {
    throw ShapeError("rank_items: policy produced " + shape_str(probs.shape()) + " for " +
                     std::to_string(world.table.items.size()) + " items");
  }
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  return order;
}

void save_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories,
                       std::optional<int> label) {
  std::ofstream out(path);
  if (!out) throw StateError("cannot write '" + path.string() + "'");
  for (const Trajectory& traj : trajectories) {
    ordered_json line;
    line["user"] = traj.user;
    if (label) line["label"] = *label;
    ordered_json steps = ordered_json::array();
    for (const TrajectoryStep& s : traj.steps) {
      ordered_json step;
      step["state"] = vec_json(s.state);
      step["action"] = s.action;
      step["reward"] = s.reward;
      step["policy_probs"] = vec_json(s.policy_probs);
      step["attacked"] = s.attacked;
      step["delta_norm"] = s.delta_norm;
      steps.push_back(std::move(step));
    }
    line["steps"] = std::move(steps);
    out << line.dump() << '\n';
  }
  if (!out) throw StateError("write failed for '" + path.string() + "'");
}

TrajectoryFile load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  TrajectoryFile file;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path.string() + ":" + std::to_string(line_no);
    ordered_json doc;
    try {
      doc = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("user") || !doc.contains("steps") ||
        !doc["steps"].is_array()) {
      throw ParseError(where + ": expected {user, steps[, label]}");
    }

    Trajectory traj;
    traj.user = doc["user"].get<std::size_t>();
    for (const auto& step : doc["steps"]) {
      if (!step.is_object() || !step.contains("state") || !step.contains("action") ||
          !step.contains("reward") || !step.contains("policy_probs") ||
          !step.contains("attacked") || !step.contains("delta_norm")) {
        throw ParseError(where + ": step missing a required field");
      }
      TrajectoryStep s;
      s.state = vec_from_json(step["state"], where + " state");
      s.action = step["action"].get<std::size_t>();
      s.reward = step["reward"].get<double>();
      s.policy_probs = vec_from_json(step["policy_probs"], where + " policy_probs");
      s.attacked = step["attacked"].get<bool>();
      s.delta_norm = step["delta_norm"].get<double>();
      traj.steps.push_back(std::move(s));
    }

    bool has_label = doc.contains("label");
    if (file.trajectories.empty()) {
      if (has_label) file.labels.push_back(doc["label"].get<int>());
    } else if (has_label != !file.labels.empty()) {
      throw ParseError(where + ": mixed labeled and unlabeled lines");
    } else if (has_label) {
      file.labels.push_back(doc["label"].get<int>());
    }
    file.trajectories.push_back(std::move(traj));
  }
  return file;
}

}  // namespace advrec
