#include "advrec/comparison.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "advrec/errors.hpp"
#include "advrec/metrics.hpp"
#include "advrec/mmd.hpp"

namespace advrec {

namespace {

std::string row_label(const AttackSpec& spec) {
  std::string label(attack_family_name(spec.family));
  if (spec.scheduler != SchedulerKind::kAlways) {
    label += '+';
    label += scheduler_name(spec.scheduler);
  }
  return label;
}

std::vector<Tensor> action_pool(std::span<const Trajectory> trajectories,
                                const EmbeddingTable& table) {
  std::vector<Tensor> pool;
  for (const Trajectory& traj : trajectories) {
    for (const TrajectoryStep& step : traj.steps) pool.push_back(table.items[step.action]);
  }
  return pool;
}

/// Within-distribution baseline: MMD between the even- and odd-indexed
/// trajectory halves of one dataset.
double split_mmd(std::span<const Trajectory> trajectories, const EmbeddingTable& table,
                 double gamma) {
  std::vector<Trajectory> even;
  std::vector<Trajectory> odd;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    (i % 2 == 0 ? even : odd).push_back(trajectories[i]);
  }
  return mmd_rbf(action_pool(even, table), action_pool(odd, table), gamma).value;
}

std::vector<std::size_t> ranking_from_state(const Agent& agent, const Tensor& state) {
  const Tensor logits = policy_logits(agent, state);
  std::vector<std::size_t> ids(logits.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    if (logits[a] != logits[b]) return logits[a] > logits[b];
    return a < b;
  });
  return ids;
}

std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw StateError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw StateError("write failed for '" + path.string() + "'");
}

}  // namespace

MetricsReport crafted_metrics(const Agent& agent, const World& world,
                              std::span<const Trajectory> trajectories,
                              std::span<const std::size_t> users, std::size_t k) {
  if (trajectories.size() != users.size()) {
    throw ShapeError("crafted_metrics: " + std::to_string(trajectories.size()) +
                     " trajectories for " + std::to_string(users.size()) + " users");
  }
  std::vector<std::vector<std::size_t>> rankings;
  std::vector<std::vector<std::size_t>> relevant;
  rankings.reserve(trajectories.size());
  relevant.reserve(users.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    for (const TrajectoryStep& step : trajectories[i].steps) {
      rankings.push_back(ranking_from_state(agent, step.state));
      relevant.push_back(world.relevant[users[i]]);
    }
  }
  return topk_metrics(rankings, relevant, k);
}

ComparisonTable attack_comparison(const Agent& agent, const World& world,
                                  std::span<const AttackSpec> specs, std::uint64_t seed,
                                  const ComparisonConfig& config) {
  if (specs.empty()) throw ConfigError("comparison: empty spec list");
  if (config.k < 1) throw ConfigError("comparison: k must be >= 1");

  std::vector<std::size_t> users = config.users;
  if (users.empty()) {
    users.resize(world.table.users.size());
    std::iota(users.begin(), users.end(), 0);
  }
  if (users.size() < 2) throw ConfigError("comparison: need at least 2 users for the split baseline");
  if (!config.labels.empty() && config.labels.size() != specs.size()) {
    throw ConfigError("comparison: labels must match specs one to one");
  }

  std::size_t reference_index = specs.size();
  for (std::size_t i = 0; i < specs.size() && reference_index == specs.size(); ++i) {
    if (specs[i].family == config.reference) reference_index = i;
  }
  if (reference_index == specs.size()) {
    throw ConfigError("comparison: no spec with reference family '" +
                      std::string(attack_family_name(config.reference)) + "'");
  }

  AttackSpec benign;
  benign.family = AttackFamily::kNone;
  const CraftResult benign_set =
      craft_dataset(agent, world, benign, users, seed, config.path_length, config.workers);
  const std::vector<Tensor> benign_pool = action_pool(benign_set.trajectories, world.table);

  const double gamma =
      config.gamma > 0.0 ? config.gamma : median_heuristic_gamma(benign_pool);

  std::vector<CraftResult> crafted;
  crafted.reserve(specs.size());
  for (const AttackSpec& spec : specs) {
    crafted.push_back(
        craft_dataset(agent, world, spec, users, seed, config.path_length, config.workers));
  }
  const std::vector<Tensor> reference_pool =
      action_pool(crafted[reference_index].trajectories, world.table);

  ComparisonTable table;
  table.k = config.k;
  table.gamma = gamma;
  table.reference = config.labels.empty() ? row_label(specs[reference_index])
                                          : config.labels[reference_index];
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const CraftResult& result = crafted[i];
    const MetricsReport metrics = crafted_metrics(agent, world, result.trajectories, users,
                                                  config.k);

    ComparisonRow row;
    row.attack = config.labels.empty() ? row_label(specs[i]) : config.labels[i];
    row.ndcg = metrics.ndcg;
    row.recall = metrics.recall;
    row.hit_ratio = metrics.hit_ratio;
    row.precision = metrics.precision;

    const std::vector<Tensor> pool = action_pool(result.trajectories, world.table);
    row.mmd_org = specs[i].family == AttackFamily::kNone
                      ? split_mmd(result.trajectories, world.table, gamma)
                      : mmd_rbf(benign_pool, pool, gamma).value;
    row.mmd_ref = i == reference_index
                      ? split_mmd(result.trajectories, world.table, gamma)
                      : mmd_rbf(pool, reference_pool, gamma).value;
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string comparison_to_csv(const ComparisonTable& table) {
  std::string out = "attack,ndcg,recall,hr,precision,mmd_org,mmd_ref\n";
  for (const ComparisonRow& row : table.rows) {
    out += row.attack;
    for (double v : {row.ndcg, row.recall, row.hit_ratio, row.precision, row.mmd_org,
                     row.mmd_ref}) {
      out += ',';
      out += format_fixed(v);
    }
    out += '\n';
  }
  return out;
}

std::string comparison_to_json(const ComparisonTable& table) {
  nlohmann::ordered_json doc;
  doc["k"] = table.k;
  doc["gamma"] = table.gamma;
  doc["reference"] = table.reference;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const ComparisonRow& row : table.rows) {
    doc["rows"].push_back(nlohmann::ordered_json{{"attack", row.attack},
                                                 {"ndcg", row.ndcg},
                                                 {"recall", row.recall},
                                                 {"hr", row.hit_ratio},
                                                 {"precision", row.precision},
                                                 {"mmd_org", row.mmd_org},
                                                 {"mmd_ref", row.mmd_ref}});
  }
  return doc.dump(2) + "\n";
}

void save_comparison_csv(const std::filesystem::path& path, const ComparisonTable& table) {
  write_text(path, comparison_to_csv(table));
}

void save_comparison_json(const std::filesystem::path& path, const ComparisonTable& table) {
  write_text(path, comparison_to_json(table));
}

}  // namespace advrec
