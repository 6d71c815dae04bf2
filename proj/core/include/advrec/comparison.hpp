#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "advrec/agent.hpp"
#include "advrec/attack.hpp"
#include "advrec/metrics.hpp"
#include "advrec/world.hpp"

namespace advrec {

struct ComparisonRow {
  std::string attack;  // caller label, or family name plus scheduler when not "always"
  double ndcg = 0.0;
  double recall = 0.0;
  double hit_ratio = 0.0;
  double precision = 0.0;
  double mmd_org = 0.0;  // vs the benign action distribution
  double mmd_ref = 0.0;  // vs the reference attack's action distribution
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;  // one per spec, input order
  std::string reference;            // label of the reference row
  double gamma = 0.0;               // RBF bandwidth actually used
  std::size_t k = 10;
};

struct ComparisonConfig {
  std::size_t k = 10;
  double gamma = 0.0;  // 0: median heuristic on the benign pool
  std::size_t path_length = 4;
  std::size_t workers = 0;
  AttackFamily reference = AttackFamily::kFgsmL1;
  std::vector<std::size_t> users;       // empty: every world user
  std::vector<std::string> labels;      // empty: derived per spec; else one per spec
};

/// Top-k metrics of the rankings the policy produces from every recorded
/// (possibly perturbed) step state, judged against world.relevant and
/// averaged across all steps of all trajectories. `users` must align with
/// the trajectories, one id per entry.
MetricsReport crafted_metrics(const Agent& agent, const World& world,
                              std::span<const Trajectory> trajectories,
                              std::span<const std::size_t> users, std::size_t k);

/// One row per spec: crafted_metrics over the spec's trajectories, MMD of the
/// spec's pooled action embeddings against the benign pool, and against the
/// reference spec's pool. A row compared against its own distribution (the
/// benign row's mmd_org, the reference row's mmd_ref) reports the even/odd
/// split baseline instead of the degenerate zero.
ComparisonTable attack_comparison(const Agent& agent, const World& world,
                                  std::span<const AttackSpec> specs, std::uint64_t seed,
                                  const ComparisonConfig& config = {});

/// Header line plus one row per spec; floats carry 6 decimals, lines end LF.
std::string comparison_to_csv(const ComparisonTable& table);
std::string comparison_to_json(const ComparisonTable& table);

void save_comparison_csv(const std::filesystem::path& path, const ComparisonTable& table);
void save_comparison_json(const std::filesystem::path& path, const ComparisonTable& table);

}  // namespace advrec
