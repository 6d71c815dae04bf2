#include "advrec/attack.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <set>
#include <thread>
#include <utility>

#include "advrec/errors.hpp"
#include "advrec/graph.hpp"
#include "advrec/nn.hpp"

namespace advrec {

namespace {

constexpr double kDeepfoolKappa = 1e-4;  // pushes past exact boundaries

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void fill_norms(Perturbation& p) {
  p.norm_l1 = p.delta.l1_norm();
  p.norm_l2 = p.delta.l2_norm();
  p.norm_linf = p.delta.linf_norm();
}

void check_state_shape(std::string_view op, const Agent& agent, const Tensor& state) {
  if (state.rank() != 1 || state.size() != agent.state_dim) {
    throw ShapeError(std::string(op) + ": state shape " + shape_str(state.shape()) +
                     " does not match agent state dim " + std::to_string(agent.state_dim));
  }
}

void check_epsilon(std::string_view op, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError(std::string(op) + ": epsilon must be positive");
  }
}

std::size_t runner_up(const Tensor& probs) {
  const std::size_t top = probs.argmax();
  std::size_t second = top == 0 ? 1 : 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (i == top) continue;
    if (probs[i] > probs[second]) second = i;
  }
  return second;
}

}  // namespace

AttackFamily parse_attack_family(std::string_view name) {
  if (name == "fgsm_l1") return AttackFamily::kFgsmL1;
  if (name == "fgsm_l2") return AttackFamily::kFgsmL2;
  if (name == "fgsm_linf") return AttackFamily::kFgsmLinf;
  if (name == "jsma") return AttackFamily::kJsma;
  if (name == "deepfool") return AttackFamily::kDeepfool;
  if (name == "none") return AttackFamily::kNone;
  throw ConfigError("unknown attack family '" + std::string(name) +
                    "' (expected fgsm_l1, fgsm_l2, fgsm_linf, jsma, deepfool or none)");
}

std::string_view attack_family_name(AttackFamily family) noexcept {
  switch (family) {
    case AttackFamily::kFgsmL1: return "fgsm_l1";
    case AttackFamily::kFgsmL2: return "fgsm_l2";
    case AttackFamily::kFgsmLinf: return "fgsm_linf";
    case AttackFamily::kJsma: return "jsma";
    case AttackFamily::kDeepfool: return "deepfool";
    case AttackFamily::kNone: return "none";
  }
  return "none";
}

SchedulerKind parse_scheduler(std::string_view name) {
  if (name == "always") return SchedulerKind::kAlways;
  if (name == "random") return SchedulerKind::kRandom;
  if (name == "timed") return SchedulerKind::kTimed;
  throw ConfigError("unknown scheduler '" + std::string(name) +
                    "' (expected always, random or timed)");
}

std::string_view scheduler_name(SchedulerKind kind) noexcept {
  switch (kind) {
    case SchedulerKind::kAlways: return "always";
    case SchedulerKind::kRandom: return "random";
    case SchedulerKind::kTimed: return "timed";
  }
  return "always";
}

void validate_attack_spec(const AttackSpec& spec) {
  if (spec.family != AttackFamily::kNone) check_epsilon("attack spec", spec.epsilon);
  if (!(spec.p_freq > 0.0) || spec.p_freq > 1.0) {
    throw ConfigError("attack spec: p_freq must lie in (0, 1]");
  }
  if (spec.threshold < 0.0 || spec.threshold >= 1.0) {
    throw ConfigError("attack spec: threshold must lie in [0, 1)");
  }
  if (spec.family == AttackFamily::kJsma &&
      (!(spec.jsma_theta > 0.0) || !std::isfinite(spec.jsma_theta))) {
    throw ConfigError("attack spec: jsma_theta must be positive");
  }
  if (spec.family == AttackFamily::kDeepfool) {
    if (spec.deepfool_sample_k < 1) throw ConfigError("attack spec: deepfool_sample_k must be >= 1");
    if (spec.deepfool_overshoot < 0.0 || !std::isfinite(spec.deepfool_overshoot)) {
      throw ConfigError("attack spec: deepfool_overshoot must be >= 0");
    }
  }
}

Perturbation fgsm(const Agent& agent, const EmbeddingTable& table, const Tensor& state,
                  std::size_t action_hint, AttackFamily norm, double epsilon) {
  if (norm != AttackFamily::kFgsmL1 && norm != AttackFamily::kFgsmL2 &&
      norm != AttackFamily::kFgsmLinf) {
    throw ConfigError("fgsm: '" + std::string(attack_family_name(norm)) +
                      "' is not an fgsm norm");
  }
  check_epsilon("fgsm", epsilon);
  check_state_shape("fgsm", agent, state);
  if (action_hint >= table.items.size()) {
    throw StateError("fgsm: action_hint " + std::to_string(action_hint) + " out of range");
  }

  Graph g;
  BoundParams bp(g, agent.params, false);
  NodeId s = g.leaf(state, true);
  g.backward(q_value_node(g, bp, s, g.constant(table.items[action_hint])));
  const Tensor& grad = g.grad(s);

  Perturbation p;
  p.delta = Tensor(Shape{state.size()});
  if (grad.linf_norm() == 0.0) {  // no direction
    fill_norms(p);
    return p;
  }
  switch (norm) {
    case AttackFamily::kFgsmLinf:
      for (std::size_t i = 0; i < grad.size(); ++i) p.delta[i] = -epsilon * sign(grad[i]);
      break;
    case AttackFamily::kFgsmL2: {
      const double n = grad.l2_norm();
      for (std::size_t i = 0; i < grad.size(); ++i) p.delta[i] = -epsilon * grad[i] / n;
      break;
    }
    default: {  // kFgsmL1
      std::size_t j = 0;
      for (std::size_t i = 1; i < grad.size(); ++i) {
        if (std::abs(grad[i]) > std::abs(grad[j])) j = i;
      }
      p.delta[j] = -epsilon * sign(grad[j]);
      break;
    }
  }
  p.applied = true;
  fill_norms(p);
  return p;
}

Perturbation jsma(const Agent& agent, const Tensor& state, double epsilon, double theta,
                  std::size_t max_dims, std::size_t max_iters, bool sign_filter,
                  std::optional<std::size_t> target) {
  check_epsilon("jsma", epsilon);
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ConfigError("jsma: theta must be positive");
  if (agent.n_items < 2) throw ConfigError("jsma: need at least 2 actions");
  check_state_shape("jsma", agent, state);
  if (target && *target >= agent.n_items) {
    throw ConfigError("jsma: target " + std::to_string(*target) + " out of range");
  }
  const std::size_t goal = target ? *target : runner_up(policy_forward(agent, state));

  const std::size_t dim = state.size();
  Perturbation p;
  p.delta = Tensor(Shape{dim});
  Tensor cur = state;
  std::set<std::size_t> touched;

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    Graph g;
    BoundParams bp(g, agent.params, false);
    NodeId s = g.leaf(cur, true);
    NodeId probs = g.softmax(policy_logits_node(g, bp, s));
    const std::size_t current = g.value(probs).argmax();
    if (current == goal) break;
    g.backward(g.pick(probs, goal));
    const Tensor gt = g.grad(s);
    g.backward(g.pick(probs, current));
    const Tensor& gc = g.grad(s);

    double best = 0.0;
    std::size_t best_j = dim;
    for (std::size_t j = 0; j < dim; ++j) {
      const double a = gt[j];
      const double b = -gc[j];
      if (sign_filter && (a <= 0.0 || b <= 0.0)) continue;
      const double saliency = a * b;
      if (saliency == 0.0) continue;
      if (best_j == dim || saliency > best) {
        best = saliency;
        best_j = j;
      }
    }
    if (best_j == dim) break;  // all-zero saliency
    if (!touched.contains(best_j) && touched.size() >= max_dims) break;
    const double step = theta * sign(gt[best_j]);
    if (std::abs(p.delta[best_j] + step) > epsilon) break;
    p.delta[best_j] += step;
    cur[best_j] += step;
    touched.insert(best_j);
    p.applied = true;
  }
  fill_norms(p);
  return p;
}

Perturbation deepfool(const Agent& agent, const Tensor& state, double epsilon,
                      std::size_t sample_k, double overshoot, std::size_t max_iters, Rng& rng) {
  check_epsilon("deepfool", epsilon);
  if (sample_k < 1) throw ConfigError("deepfool: sample_k must be >= 1");
  if (overshoot < 0.0 || !std::isfinite(overshoot)) {
    throw ConfigError("deepfool: overshoot must be >= 0");
  }
  if (agent.n_items < 2) throw ConfigError("deepfool: need at least 2 actions");
  check_state_shape("deepfool", agent, state);

  const std::size_t dim = state.size();
  const std::size_t orig = policy_logits(agent, state).argmax();
  std::vector<std::size_t> candidates;
  candidates.reserve(agent.n_items - 1);
  for (std::size_t c = 0; c < agent.n_items; ++c) {
    if (c != orig) candidates.push_back(c);
  }
  const std::size_t k = std::min(sample_k, candidates.size());

  Perturbation p;
  p.delta = Tensor(Shape{dim});
  Tensor cur = state;

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    Graph g;
    BoundParams bp(g, agent.params, false);
    NodeId s = g.leaf(cur, true);
    NodeId logits = policy_logits_node(g, bp, s);
    if (g.value(logits).argmax() != orig) break;

    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
    }

    double best_score = std::numeric_limits<double>::infinity();
    double best_d = 0.0;
    double best_wn = 0.0;
    Tensor best_w;
    for (std::size_t i = 0; i < k; ++i) {
      NodeId diff = g.sub(g.pick(logits, candidates[i]), g.pick(logits, orig));
      const double d = g.scalar(diff);
      g.backward(diff);
      const Tensor& w = g.grad(s);
      const double wn = w.l2_norm();
      if (wn == 0.0) continue;
      const double score = std::abs(d) / wn;
      if (score < best_score) {
        best_score = score;
        best_d = d;
        best_wn = wn;
        best_w = w;
      }
    }
    if (!std::isfinite(best_score)) continue;  // every sampled class was degenerate

    const double coef = (std::abs(best_d) + kDeepfoolKappa) / (best_wn * best_wn) *
                        (1.0 + overshoot);
    bool clipped = false;
    for (std::size_t i = 0; i < dim; ++i) p.delta[i] += coef * best_w[i];
    const double n2 = p.delta.l2_norm();
    if (n2 > epsilon) {
      const double shrink = epsilon / n2;
      for (std::size_t i = 0; i < dim; ++i) p.delta[i] *= shrink;
      clipped = true;
    }
    p.applied = true;
    for (std::size_t i = 0; i < dim; ++i) cur[i] = state[i] + p.delta[i];
    if (clipped) break;
  }
  fill_norms(p);
  return p;
}

bool timed_mask(const Tensor& policy_probs, double threshold) {
  if (policy_probs.size() < 2) {
    throw ShapeError("timed_mask: need at least 2 probabilities, got " +
                     shape_str(policy_probs.shape()));
  }
  if (threshold < 0.0 || threshold >= 1.0) {
    throw ConfigError("timed_mask: threshold must lie in [0, 1)");
  }
  double p0 = -std::numeric_limits<double>::infinity();
  double p1 = p0;
  for (const double v : policy_probs.data()) {
    if (v > p0) {
      p1 = p0;
      p0 = v;
    } else if (v > p1) {
      p1 = v;
    }
  }
  return (p0 - p1) > threshold;
}

bool random_mask(double p_freq, Rng& rng) {
  if (!(p_freq > 0.0) || p_freq > 1.0) throw ConfigError("random_mask: p_freq must lie in (0, 1]");
  return rng.bernoulli(p_freq);
}

Perturber make_perturber(const Agent& agent, const EmbeddingTable& table, const AttackSpec& spec,
                         Rng& rng) {
  validate_attack_spec(spec);
  if (spec.family == AttackFamily::kNone) {
    return [](const Tensor&, std::size_t) -> std::optional<Tensor> { return std::nullopt; };
  }
  return [&agent, &table, spec, &rng](const Tensor& state,
                                      std::size_t) -> std::optional<Tensor> {
    bool gate = true;
    switch (spec.scheduler) {
      case SchedulerKind::kAlways: break;
      case SchedulerKind::kRandom: gate = random_mask(spec.p_freq, rng); break;
      case SchedulerKind::kTimed:
        gate = timed_mask(policy_forward(agent, state), spec.threshold);
        break;
    }
    if (!gate) return std::nullopt;

    Perturbation p;
    switch (spec.family) {
      case AttackFamily::kFgsmL1:
      case AttackFamily::kFgsmL2:
      case AttackFamily::kFgsmLinf:
        p = fgsm(agent, table, state, policy_logits(agent, state).argmax(), spec.family,
                 spec.epsilon);
        break;
      case AttackFamily::kJsma:
        p = jsma(agent, state, spec.epsilon, spec.jsma_theta, spec.jsma_max_dims,
                 spec.jsma_max_iters, spec.jsma_sign_filter);
        break;
      default:  // kDeepfool
        p = deepfool(agent, state, spec.epsilon, spec.deepfool_sample_k, spec.deepfool_overshoot,
                     spec.deepfool_max_iters, rng);
        break;
    }
    if (!p.applied) return std::nullopt;
    Tensor out = state;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.delta[i];
    return out;
  };
}

CraftResult craft_dataset(const Agent& agent, const World& world, const AttackSpec& spec,
                          std::span<const std::size_t> users, std::uint64_t seed,
                          std::size_t path_length, std::size_t workers) {
  validate_attack_spec(spec);
  if (users.empty()) throw ConfigError("craft_dataset: users must be non-empty");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = users.size();

  struct UserStats {
    std::size_t attacked = 0;
    double l1 = 0.0;
    double l2 = 0.0;
    double linf = 0.0;
  };
  std::vector<Trajectory> trajectories(n);
  std::vector<UserStats> stats(n);

  auto craft_user = [&](std::size_t idx) {
    const std::size_t user = users[idx];
    Rng attack_rng(derive_seed(seed, "craft-attack", user));
    Rng env_rng(derive_seed(seed, "craft-env", user));
    Perturber family_perturber = make_perturber(agent, world.table, spec, attack_rng);
    UserStats& st = stats[idx];
    Perturber counting = [&](const Tensor& s, std::size_t step) -> std::optional<Tensor> {
      std::optional<Tensor> out = family_perturber(s, step);
      if (out) {
        Tensor d(Shape{s.size()});
        for (std::size_t i = 0; i < s.size(); ++i) d[i] = (*out)[i] - s[i];
        st.attacked += 1;
        st.l1 += d.l1_norm();
        st.l2 += d.l2_norm();
        st.linf += d.linf_norm();
      }
      return out;
    };
    RolloutConfig rc;
    rc.path_length = path_length;
    rc.greedy = true;
    trajectories[idx] = rollout(agent_logits_fn(agent), world, user, rc, env_rng, counting);
  };

  std::size_t pool = workers ? workers : std::thread::hardware_concurrency();
  if (pool == 0) pool = 1;
  pool = std::min(pool, n);
  if (pool <= 1) {
    for (std::size_t i = 0; i < n; ++i) craft_user(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(pool);
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (std::size_t w = 0; w < pool; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            craft_user(i);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (std::thread& t : threads) t.join();
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::size_t attacked = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  for (const UserStats& st : stats) {
    attacked += st.attacked;
    l1 += st.l1;
    l2 += st.l2;
    linf += st.linf;
  }

  CraftResult result;
  result.trajectories = std::move(trajectories);
  result.label = spec.family == AttackFamily::kNone ? 0 : 1;
  AttackReport& r = result.report;
  r.family = std::string(attack_family_name(spec.family));
  r.epsilon = spec.epsilon;
  r.scheduler = std::string(scheduler_name(spec.scheduler));
  r.achieved_frequency =
      static_cast<double>(attacked) / (static_cast<double>(path_length) * static_cast<double>(n));
  if (attacked > 0) {
    r.mean_delta_l1 = l1 / static_cast<double>(attacked);
    r.mean_delta_l2 = l2 / static_cast<double>(attacked);
    r.mean_delta_linf = linf / static_cast<double>(attacked);
  }
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string attack_report_to_json(const AttackReport& report) {
  nlohmann::ordered_json doc{{"family", report.family},
                             {"epsilon", report.epsilon},
                             {"scheduler", report.scheduler},
                             {"achieved_frequency", report.achieved_frequency},
                             {"mean_delta_l1", report.mean_delta_l1},
                             {"mean_delta_l2", report.mean_delta_l2},
                             {"mean_delta_linf", report.mean_delta_linf},
                             {"wall_time_s", report.wall_time_s}};
  return doc.dump(2) + "\n";
}

void save_attack_report(const std::filesystem::path& path, const AttackReport& report) {
  std::ofstream out(path);
  if (!out) throw StateError("cannot write '" + path.string() + "'");
  out << attack_report_to_json(report);
  out.flush();
  if (!out) throw StateError("write failed for '" + path.string() + "'");
}

}  // namespace advrec
