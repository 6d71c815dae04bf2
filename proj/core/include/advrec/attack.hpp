#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advrec/agent.hpp"
#include "advrec/embedding.hpp"
#include "advrec/rng.hpp"
#include "advrec/tensor.hpp"
#include "advrec/trajectory.hpp"
#include "advrec/world.hpp"

namespace advrec {

enum class AttackFamily { kFgsmL1, kFgsmL2, kFgsmLinf, kJsma, kDeepfool, kNone };
enum class SchedulerKind { kAlways, kRandom, kTimed };

AttackFamily parse_attack_family(std::string_view name);
std::string_view attack_family_name(AttackFamily family) noexcept;
SchedulerKind parse_scheduler(std::string_view name);
std::string_view scheduler_name(SchedulerKind kind) noexcept;

/// Per-step attack description. epsilon bounds each step's perturbation in
/// the norm matching the family (jsma caps the linf norm, deepfool the l2).
struct AttackSpec {
  AttackFamily family = AttackFamily::kNone;
  double epsilon = 0.0;
  SchedulerKind scheduler = SchedulerKind::kAlways;
  double p_freq = 0.5;     // random scheduler: per-step Bernoulli attack rate
  double threshold = 0.0;  // timed scheduler: attack when p0 - p1 > threshold
  double jsma_theta = 0.15;
  std::size_t jsma_max_dims = 10;  // budget of distinct dimensions
  std::size_t jsma_max_iters = 25;
  bool jsma_sign_filter = true;  // drop dimensions whose gradient signs do not help
  std::size_t deepfool_sample_k = 16;
  double deepfool_overshoot = 0.02;
  std::size_t deepfool_max_iters = 10;
};

void validate_attack_spec(const AttackSpec& spec);

struct Perturbation {
  Tensor delta;
  double norm_l1 = 0.0;
  double norm_l2 = 0.0;
  double norm_linf = 0.0;
  bool applied = false;
};

/// One-step attack on the value network: g = grad_s Q(s, item(action_hint)),
/// moved against Q. linf: -eps*sign(g); l2: -eps*g/|g|2; l1: -eps*sign(g_j)
/// on the single coordinate j = argmax |g_j|. A zero gradient yields a zero
/// delta with applied=false.
Perturbation fgsm(const Agent& agent, const EmbeddingTable& table, const Tensor& state,
                  std::size_t action_hint, AttackFamily norm, double epsilon);

/// Saliency-guided single-dimension steps on the policy softmax. The target
/// defaults to the clean runner-up class. Per iteration the saliency of
/// dimension i is (dp_target/dx_i) * (-dp_current/dx_i); with sign_filter on,
/// dimensions where either factor is <= 0 are discarded. The top dimension
/// moves by theta*sign(dp_target/dx_i). Stops on argmax flip, max_dims
/// distinct dimensions, max_iters, or when |delta|_inf would exceed epsilon.
Perturbation jsma(const Agent& agent, const Tensor& state, double epsilon, double theta,
                  std::size_t max_dims, std::size_t max_iters, bool sign_filter = true,
                  std::optional<std::size_t> target = std::nullopt);

/// Sampled Deepfool on the policy logits: per iteration sample_k non-argmax
/// classes are drawn without replacement, the closest linearized boundary
/// wins, and delta steps past it by (1+overshoot). Stops on argmax flip,
/// max_iters, or when |delta|_2 exceeds epsilon (clipped to the budget).
Perturbation deepfool(const Agent& agent, const Tensor& state, double epsilon,
                      std::size_t sample_k, double overshoot, std::size_t max_iters, Rng& rng);

/// Strategically-timed gate: attack iff (largest - second largest) > threshold.
bool timed_mask(const Tensor& policy_probs, double threshold);
/// Random gate: one Bernoulli(p_freq) draw from the stream.
bool random_mask(double p_freq, Rng& rng);

/// Rollout hook combining the spec's scheduler and family. Gated-off steps
/// and zero-gradient skips stay clean (nullopt). The agent, table and rng are
/// captured by reference and must outlive the perturber.
Perturber make_perturber(const Agent& agent, const EmbeddingTable& table, const AttackSpec& spec,
                         Rng& rng);

struct AttackReport {
  std::string family;
  double epsilon = 0.0;
  std::string scheduler;
  double achieved_frequency = 0.0;  // attacked steps / (path_length * |users|)
  double mean_delta_l1 = 0.0;       // means over attacked steps only
  double mean_delta_l2 = 0.0;
  double mean_delta_linf = 0.0;
  double wall_time_s = 0.0;
};

struct CraftResult {
  std::vector<Trajectory> trajectories;  // one per user, input order
  int label = 0;                         // 1 when spec.family != none
  AttackReport report;
};

/// Greedy evaluation rollouts under the spec's perturber, one per user,
/// fanned out over `workers` threads (0 = hardware concurrency) and merged in
/// input order. Each user owns rng streams derived from (seed, user), so the
/// result is independent of the worker count.
CraftResult craft_dataset(const Agent& agent, const World& world, const AttackSpec& spec,
                          std::span<const std::size_t> users, std::uint64_t seed,
                          std::size_t path_length = 4, std::size_t workers = 0);

std::string attack_report_to_json(const AttackReport& report);
void save_attack_report(const std::filesystem::path& path, const AttackReport& report);

}  // namespace advrec
