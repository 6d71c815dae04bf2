#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "advrec/agent.hpp"
#include "advrec/attack.hpp"
#include "advrec/detector.hpp"
#include "advrec/world.hpp"

namespace advrec::cli {

/// Frequency-sweep grid for cmd_attack: one (scheduler, param) row per point,
/// crossed with every family.
struct SweepConfig {
  std::vector<AttackFamily> families;
  double epsilon = 0.0;
  std::vector<double> p_freqs;     // random-scheduler points
  std::vector<double> thresholds;  // timed-scheduler points
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out;

  WorldConfig world;                   // world.seed mirrors the top-level seed
  std::filesystem::path embeddings;    // when set, load this table instead

  TrainConfig agent;                   // agent.seed derived from the top-level seed

  std::vector<AttackSpec> attacks;
  std::vector<std::string> attack_labels;  // parallel to attacks, unique
  std::optional<SweepConfig> sweep;

  DetectorTrainConfig detector;        // detector.seed derived from the top-level seed
  std::string train_attack = "fgsm_l1";  // label of the detector's training dataset
  double detect_threshold = 0.5;

  std::size_t k = 10;
  double analysis_gamma = 0.0;  // 0: median heuristic
  AttackFamily reference = AttackFamily::kFgsmL1;
};

/// Parses and validates the JSON experiment file. Unknown keys, missing seed,
/// duplicate attack labels and dangling file references are ConfigErrors.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical serialization with every default materialized; the config hash
/// covers exactly these bytes. The output directory is deliberately omitted
/// so runs into different directories stay byte-comparable.
std::string resolved_config_json(const ExperimentConfig& config);

/// FNV-1a 64-bit over the resolved config text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Worker-pool bound from ADVREC_WORKERS (0 = available parallelism).
std::size_t workers_from_env();

World build_world(const ExperimentConfig& config);

void cmd_train_agent(const ExperimentConfig& config);
void cmd_attack(const ExperimentConfig& config);
void cmd_detect(const ExperimentConfig& config);
void cmd_report(const ExperimentConfig& config);

/// Full argv entry point: subcommands train-agent | attack | detect | report,
/// each with --config/--out/--seed. Returns the process exit code: 0 success,
/// 1 runtime failure, 2 configuration or usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace advrec::cli
