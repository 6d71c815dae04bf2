#include <algorithm>
#include <cmath>
#include <cstddef>
#include <json.hpp>
#include <numeric>
#include <vector>

#include "advrec/attack.hpp"
#include "advrec/errors.hpp"
#include "advrec/world.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace advrec;

namespace {

// Exact linear networks: relu(x + c) = x + c on the operating range and the
// output bias removes c again, so policy logits = M*s and Q = w . [s||item].
Agent linear_agent(Tensor policy_m, Tensor value_w, std::size_t item_dim) {
  const std::size_t n_items = policy_m.rows();
  const std::size_t state_dim = policy_m.cols();
  constexpr double c = 100.0;
  Agent a = make_agent(n_items, state_dim, item_dim, n_items, "actor_critic", 0);
  a.params.at("policy.l1.w") = std::move(policy_m);
  a.params.at("policy.l1.b") = Tensor(Shape{n_items}, c);
  Tensor eye(Shape{n_items, n_items});
  for (std::size_t i = 0; i < n_items; ++i) eye.at2(i, i) = 1.0;
  a.params.at("policy.l2.w") = eye;
  a.params.at("policy.l2.b") = Tensor(Shape{n_items}, -c);
  Tensor v1(Shape{n_items, state_dim + item_dim});
  for (std::size_t j = 0; j < value_w.size(); ++j) v1.at2(0, j) = value_w[j];
  a.params.at("value.l1.w") = v1;
  a.params.at("value.l1.b") = Tensor(Shape{n_items}, c);
  Tensor v2(Shape{1, n_items});
  v2.at2(0, 0) = 1.0;
  a.params.at("value.l2.w") = v2;
  a.params.at("value.l2.b") = Tensor::vec({-c});
  return a;
}

EmbeddingTable toy_table(std::size_t dim, std::size_t n_items) {
  EmbeddingTable t;
  t.dim = dim;
  t.users.push_back(Tensor(Shape{dim}, 1.0));
  t.user_ids.push_back("u0");
  for (std::size_t i = 0; i < n_items; ++i) {
    t.items.push_back(Tensor(Shape{dim}, 0.1 * static_cast<double>(i + 1)));
    t.item_ids.push_back("i" + std::to_string(i));
  }
  return t;
}

// Q = 0.3*s0 - 0.2*s1 regardless of the item.
Agent gradient_probe_agent(double g0, double g1) {
  Tensor m(Shape{2, 2});
  m.at2(0, 0) = 1.0;
  m.at2(1, 1) = 1.0;
  return linear_agent(m, Tensor::vec({g0, g1, 0.0, 0.0}), 2);
}

std::size_t count_nonzero(const Tensor& t) {
  std::size_t n = 0;
  for (const double v : t.data()) n += v != 0.0;
  return n;
}

World small_world() {
  WorldConfig wc;
  wc.n_users = 20;
  wc.n_items = 50;
  wc.dim = 8;
  wc.latent_clusters = 4;
  wc.relevant_per_user = 2;
  wc.seed = 7;
  return generate_world(wc);
}

bool same_trajectory(const Trajectory& a, const Trajectory& b) {
  if (a.user != b.user || a.steps.size() != b.steps.size()) return false;
  for (std::size_t t = 0; t < a.steps.size(); ++t) {
    const TrajectoryStep& x = a.steps[t];
    const TrajectoryStep& y = b.steps[t];
    if (x.action != y.action || x.reward != y.reward || x.attacked != y.attacked ||
        x.delta_norm != y.delta_norm || !(x.state == y.state) ||
        !(x.policy_probs == y.policy_probs)) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("attacks") {

TEST_CASE("fgsm linf follows the sign rule") {
  Agent a = gradient_probe_agent(0.3, -0.2);
  EmbeddingTable table = toy_table(2, 3);
  Tensor state = Tensor::vec({0.05, -0.03});
  Perturbation p = fgsm(a, table, state, 0, AttackFamily::kFgsmLinf, 0.5);
  REQUIRE(p.applied);
  CHECK(p.delta[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(p.delta[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.norm_linf == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.norm_l1 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fgsm l2 normalizes the gradient") {
  Agent a = gradient_probe_agent(3.0, 4.0);
  EmbeddingTable table = toy_table(2, 3);
  Perturbation p = fgsm(a, table, Tensor::vec({0.0, 0.0}), 1, AttackFamily::kFgsmL2, 1.0);
  REQUIRE(p.applied);
  CHECK(p.delta[0] == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(p.delta[1] == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(p.norm_l2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fgsm l1 hits only the largest-gradient coordinate") {
  Agent a = gradient_probe_agent(0.3, -0.2);
  EmbeddingTable table = toy_table(2, 3);
  Perturbation p = fgsm(a, table, Tensor::vec({0.1, 0.2}), 2, AttackFamily::kFgsmL1, 0.1);
  REQUIRE(p.applied);
  CHECK(p.delta[0] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(p.delta[1] == 0.0);
  CHECK(count_nonzero(p.delta) == 1);
  CHECK(p.norm_l1 == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("fgsm decreases the linear Q for every norm") {
  Agent a = gradient_probe_agent(0.7, -0.4);
  EmbeddingTable table = toy_table(2, 3);
  Tensor state = Tensor::vec({0.2, 0.1});
  const double q0 = q_forward(a, state, table.items[0]);
  for (AttackFamily norm :
       {AttackFamily::kFgsmL1, AttackFamily::kFgsmL2, AttackFamily::kFgsmLinf}) {
    Perturbation p = fgsm(a, table, state, 0, norm, 0.3);
    REQUIRE(p.applied);
    Tensor moved = state;
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += p.delta[i];
    CHECK(q_forward(a, moved, table.items[0]) < q0);
  }
}

TEST_CASE("fgsm with a zero gradient does not apply") {
  Agent a = gradient_probe_agent(0.0, 0.0);
  EmbeddingTable table = toy_table(2, 3);
  Perturbation p = fgsm(a, table, Tensor::vec({0.4, 0.4}), 0, AttackFamily::kFgsmLinf, 0.5);
  CHECK_FALSE(p.applied);
  CHECK(p.norm_l1 == 0.0);
  CHECK(p.norm_l2 == 0.0);
  CHECK(p.norm_linf == 0.0);
  CHECK(count_nonzero(p.delta) == 0);
}

TEST_CASE("fgsm validates its inputs") {
  Agent a = gradient_probe_agent(0.3, -0.2);
  EmbeddingTable table = toy_table(2, 3);
  Tensor state = Tensor::vec({0.0, 0.0});
  CHECK_THROWS_AS(fgsm(a, table, state, 0, AttackFamily::kJsma, 0.5), ConfigError);
  CHECK_THROWS_AS(fgsm(a, table, state, 0, AttackFamily::kFgsmL2, 0.0), ConfigError);
  CHECK_THROWS_AS(fgsm(a, table, state, 0, AttackFamily::kFgsmL2, -1.0), ConfigError);
  CHECK_THROWS_AS(fgsm(a, table, Tensor::vec({1.0}), 0, AttackFamily::kFgsmL2, 0.5), ShapeError);
  CHECK_THROWS_AS(fgsm(a, table, state, 99, AttackFamily::kFgsmL2, 0.5), StateError);
}

TEST_CASE("fgsm norm budgets hold on random networks") {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    Agent a = make_agent(6, 4, 2, 8, "actor_critic", derive_seed(5, "attack-net", rep));
    EmbeddingTable table = toy_table(2, 6);
    Tensor state(Shape{4});
    for (std::size_t i = 0; i < 4; ++i) state[i] = rng.normal();
    const double eps = 0.2;
    Perturbation l1 = fgsm(a, table, state, 0, AttackFamily::kFgsmL1, eps);
    Perturbation l2 = fgsm(a, table, state, 0, AttackFamily::kFgsmL2, eps);
    Perturbation linf = fgsm(a, table, state, 0, AttackFamily::kFgsmLinf, eps);
    REQUIRE(l1.applied);
    CHECK(l1.norm_l1 <= eps + 1e-9);
    CHECK(count_nonzero(l1.delta) == 1);
    CHECK(l2.norm_l2 <= eps + 1e-9);
    CHECK(l2.norm_l2 == doctest::Approx(eps).epsilon(1e-9));
    CHECK(linf.norm_linf <= eps + 1e-9);
    for (const double d : linf.delta.data()) {
      CHECK((d == 0.0 || std::abs(std::abs(d) - eps) < 1e-12));
    }
    for (const Perturbation* p : {&l1, &l2, &linf}) {
      CHECK(std::abs(p->norm_l1 - p->delta.l1_norm()) <= 1e-9);
      CHECK(std::abs(p->norm_l2 - p->delta.l2_norm()) <= 1e-9);
      CHECK(std::abs(p->norm_linf - p->delta.linf_norm()) <= 1e-9);
    }
  }
}

TEST_CASE("jsma flips the linear toy in two steps on the second dimension") {
  Tensor m(Shape{2, 2});
  m.at2(0, 0) = 1.0;
  m.at2(1, 1) = 1.0;
  Agent a = linear_agent(m, Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Tensor state = Tensor::vec({1.0, 0.0});
  Perturbation p = jsma(a, state, 2.0, 0.6, 10, 25);
  REQUIRE(p.applied);
  CHECK(p.delta[0] == 0.0);
  CHECK(p.delta[1] == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(count_nonzero(p.delta) == 1);
  Tensor moved = Tensor::vec({1.0, 1.2});
  CHECK(policy_logits(a, moved).argmax() == 1);
}

TEST_CASE("jsma stops at the linf budget before flipping") {
  Tensor m(Shape{2, 2});
  m.at2(0, 0) = 1.0;
  m.at2(1, 1) = 1.0;
  Agent a = linear_agent(m, Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Perturbation p = jsma(a, Tensor::vec({1.0, 0.0}), 1.0, 0.6, 10, 25);
  REQUIRE(p.applied);
  CHECK(p.norm_linf == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(policy_logits(a, Tensor::vec({1.0, 0.6})).argmax() == 0);
}

TEST_CASE("jsma returns a zero delta when already at the target or out of budget") {
  Tensor m(Shape{2, 2});
  m.at2(0, 0) = 1.0;
  m.at2(1, 1) = 1.0;
  Agent a = linear_agent(m, Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Tensor state = Tensor::vec({1.0, 0.0});

  Perturbation at_target = jsma(a, state, 2.0, 0.6, 10, 25, true, 0);
  CHECK_FALSE(at_target.applied);
  CHECK(count_nonzero(at_target.delta) == 0);

  Perturbation no_dims = jsma(a, state, 2.0, 0.6, 0, 25);
  CHECK_FALSE(no_dims.applied);
  CHECK(count_nonzero(no_dims.delta) == 0);

  Perturbation no_iters = jsma(a, state, 2.0, 0.6, 10, 0);
  CHECK_FALSE(no_iters.applied);
}

TEST_CASE("jsma sign filter rejects decreasing moves that the raw saliency takes") {
  // f0 = 5*x0, f1 = -5*x0, f2 = x1: reaching class 1 needs x0 to shrink, which
  // only shows up as a usable (positive) saliency when the filter is off.
  Tensor m(Shape{3, 2});
  m.at2(0, 0) = 5.0;
  m.at2(1, 0) = -5.0;
  m.at2(2, 1) = 1.0;
  Agent a = linear_agent(m, Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Tensor state = Tensor::vec({0.1, 0.0});
  REQUIRE(policy_logits(a, state).argmax() == 0);

  Perturbation filtered = jsma(a, state, 2.0, 0.2, 10, 25, true, 1);
  CHECK_FALSE(filtered.applied);
  CHECK(count_nonzero(filtered.delta) == 0);

  Perturbation raw = jsma(a, state, 2.0, 0.2, 10, 25, false, 1);
  REQUIRE(raw.applied);
  CHECK(raw.delta[0] == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(raw.delta[1] == 0.0);
  Tensor moved = Tensor::vec({-0.1, 0.0});
  CHECK(policy_logits(a, moved).argmax() == 1);
}

TEST_CASE("jsma drives an explicit target class") {
  Tensor m(Shape{3, 2});
  m.at2(0, 0) = 5.0;
  m.at2(1, 0) = -5.0;
  m.at2(2, 1) = 1.0;
  Agent a = linear_agent(m, Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Tensor state = Tensor::vec({0.1, 0.0});
  Perturbation p = jsma(a, state, 2.0, 0.2, 10, 25, true, 2);
  REQUIRE(p.applied);
  CHECK(p.delta[0] == 0.0);
  CHECK(p.delta[1] == doctest::Approx(0.6).epsilon(1e-12));
  Tensor moved = Tensor::vec({0.1, 0.6});
  CHECK(policy_logits(a, moved).argmax() == 2);
}

TEST_CASE("jsma validates its inputs") {
  Tensor m(Shape{2, 2});
  m.at2(0, 0) = 1.0;
  m.at2(1, 1) = 1.0;
  Agent a = linear_agent(m, Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Tensor state = Tensor::vec({1.0, 0.0});
  CHECK_THROWS_AS(jsma(a, state, 0.0, 0.6, 10, 25), ConfigError);
  CHECK_THROWS_AS(jsma(a, state, 2.0, 0.0, 10, 25), ConfigError);
  CHECK_THROWS_AS(jsma(a, state, 2.0, 0.6, 10, 25, true, 7), ConfigError);
  CHECK_THROWS_AS(jsma(a, Tensor::vec({1.0}), 2.0, 0.6, 10, 25), ShapeError);
}

TEST_CASE("deepfool projects onto the linear boundary with the stabilizer") {
  // f0 = x0, f1 = -x0: the boundary sits at x0 = 0, two units from the state.
  Tensor m(Shape{2, 2});
  m.at2(0, 0) = 1.0;
  m.at2(1, 0) = -1.0;
  Agent a = linear_agent(m, Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Rng rng(4);
  Perturbation p = deepfool(a, Tensor::vec({2.0, 0.0}), 10.0, 1, 0.0, 10, rng);
  REQUIRE(p.applied);
  const double expected = (4.0 + 1e-4) / 4.0 * 2.0;  // (|d| + kappa)/|w|^2 * |w|
  CHECK(p.delta[0] == doctest::Approx(-expected).epsilon(1e-12));
  CHECK(p.delta[1] == 0.0);
  CHECK(policy_logits(a, Tensor::vec({2.0 + p.delta[0], 0.0})).argmax() == 1);
}

TEST_CASE("deepfool flips within one step on the decision boundary") {
  Tensor m(Shape{2, 2});
  m.at2(0, 0) = 1.0;
  m.at2(1, 0) = -1.0;
  Agent a = linear_agent(m, Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Rng rng(4);
  Perturbation p = deepfool(a, Tensor::vec({0.0, 0.0}), 1.0, 1, 0.0, 10, rng);
  REQUIRE(p.applied);
  CHECK(p.norm_l2 <= 1e-3);
  CHECK(policy_logits(a, Tensor::vec({p.delta[0], p.delta[1]})).argmax() == 1);
}

TEST_CASE("deepfool clips to the l2 budget and stops") {
  Tensor m(Shape{2, 2});
  m.at2(0, 0) = 1.0;
  m.at2(1, 0) = -1.0;
  Agent a = linear_agent(m, Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Rng rng(4);
  Perturbation p = deepfool(a, Tensor::vec({2.0, 0.0}), 0.01, 1, 0.0, 10, rng);
  REQUIRE(p.applied);
  CHECK(p.norm_l2 == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(policy_logits(a, Tensor::vec({2.0 + p.delta[0], p.delta[1]})).argmax() == 0);
}

TEST_CASE("deepfool full class search never does worse than a sampled subset") {
  Rng init(9);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor m(Shape{6, 4});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = init.normal();
    Agent a = linear_agent(m, Tensor(Shape{8}), 4);
    Tensor state(Shape{4});
    for (std::size_t i = 0; i < 4; ++i) state[i] = 0.3 * init.normal();
    Rng full_rng(derive_seed(1, "deepfool-full", rep));
    Perturbation full = deepfool(a, state, 100.0, 5, 0.0, 10, full_rng);
    REQUIRE(full.applied);
    for (std::size_t k : {std::size_t{1}, std::size_t{2}}) {
      Rng sub_rng(derive_seed(2, "deepfool-sub", rep * 10 + k));
      Perturbation sub = deepfool(a, state, 100.0, k, 0.0, 10, sub_rng);
      REQUIRE(sub.applied);
      CHECK(full.norm_l2 <= sub.norm_l2 + 1e-9);
    }
  }
}

TEST_CASE("deepfool reports applied=false when every direction is degenerate") {
  Agent a = linear_agent(Tensor(Shape{3, 2}), Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Rng rng(4);
  Perturbation p = deepfool(a, Tensor::vec({1.0, 1.0}), 1.0, 2, 0.02, 5, rng);
  CHECK_FALSE(p.applied);
  CHECK(count_nonzero(p.delta) == 0);
}

TEST_CASE("deepfool validates its inputs") {
  Tensor m(Shape{2, 2});
  m.at2(0, 0) = 1.0;
  Agent a = linear_agent(m, Tensor::vec({0.0, 0.0, 0.0, 0.0}), 2);
  Rng rng(4);
  Tensor state = Tensor::vec({1.0, 0.0});
  CHECK_THROWS_AS(deepfool(a, state, 0.0, 1, 0.0, 10, rng), ConfigError);
  CHECK_THROWS_AS(deepfool(a, state, 1.0, 0, 0.0, 10, rng), ConfigError);
  CHECK_THROWS_AS(deepfool(a, state, 1.0, 1, -0.5, 10, rng), ConfigError);
  CHECK_THROWS_AS(deepfool(a, Tensor::vec({1.0}), 1.0, 1, 0.0, 10, rng), ShapeError);
}

TEST_CASE("timed mask compares the top-two probability gap") {
  CHECK(timed_mask(Tensor::vec({0.7, 0.2, 0.1}), 0.4));
  CHECK_FALSE(timed_mask(Tensor::vec({1.0 / 3, 1.0 / 3, 1.0 / 3}), 0.0));
  CHECK(timed_mask(Tensor::vec({0.6, 0.4}), 0.0));
  CHECK_FALSE(timed_mask(Tensor::vec({0.5, 0.5}), 0.0));
  CHECK_THROWS_AS(timed_mask(Tensor::vec({1.0}), 0.1), ShapeError);
  CHECK_THROWS_AS(timed_mask(Tensor::vec({0.6, 0.4}), 1.0), ConfigError);
  CHECK_THROWS_AS(timed_mask(Tensor::vec({0.6, 0.4}), -0.1), ConfigError);
}

TEST_CASE("random mask matches its frequency and replays under the same seed") {
  Rng always(3);
  for (int i = 0; i < 1000; ++i) CHECK(random_mask(1.0, always));

  Rng sparse(5);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += random_mask(0.02, sparse);
  CHECK(hits >= 100);
  CHECK(hits <= 300);

  Rng a(11), b(11);
  for (int i = 0; i < 200; ++i) CHECK(random_mask(0.5, a) == random_mask(0.5, b));

  Rng r(1);
  CHECK_THROWS_AS(random_mask(0.0, r), ConfigError);
  CHECK_THROWS_AS(random_mask(1.2, r), ConfigError);
}

TEST_CASE("attack family and scheduler names round trip") {
  for (AttackFamily f : {AttackFamily::kFgsmL1, AttackFamily::kFgsmL2, AttackFamily::kFgsmLinf,
                         AttackFamily::kJsma, AttackFamily::kDeepfool, AttackFamily::kNone}) {
    CHECK(parse_attack_family(attack_family_name(f)) == f);
  }
  for (SchedulerKind s : {SchedulerKind::kAlways, SchedulerKind::kRandom, SchedulerKind::kTimed}) {
    CHECK(parse_scheduler(scheduler_name(s)) == s);
  }
  CHECK_THROWS_WITH_AS(parse_attack_family("fgsm"),
                       doctest::Contains("fgsm_l1"), ConfigError);
  CHECK_THROWS_AS(parse_scheduler("sometimes"), ConfigError);
}

TEST_CASE("attack spec validation") {
  AttackSpec ok;
  validate_attack_spec(ok);  // family none with epsilon 0 is legal

  AttackSpec eps = ok;
  eps.family = AttackFamily::kFgsmL1;
  CHECK_THROWS_AS(validate_attack_spec(eps), ConfigError);
  eps.epsilon = 0.5;
  validate_attack_spec(eps);

  AttackSpec freq = eps;
  freq.p_freq = 0.0;
  CHECK_THROWS_AS(validate_attack_spec(freq), ConfigError);
  freq.p_freq = 1.5;
  CHECK_THROWS_AS(validate_attack_spec(freq), ConfigError);

  AttackSpec thr = eps;
  thr.threshold = 1.0;
  CHECK_THROWS_AS(validate_attack_spec(thr), ConfigError);

  AttackSpec js = eps;
  js.family = AttackFamily::kJsma;
  js.jsma_theta = 0.0;
  CHECK_THROWS_AS(validate_attack_spec(js), ConfigError);

  AttackSpec df = eps;
  df.family = AttackFamily::kDeepfool;
  df.deepfool_sample_k = 0;
  CHECK_THROWS_AS(validate_attack_spec(df), ConfigError);
}

TEST_CASE("craft with family none reproduces clean greedy rollouts") {
  World w = small_world();
  Agent a = make_agent(50, 16, 8, 16, "actor_critic", 3);
  std::vector<std::size_t> users(w.table.users.size());
  std::iota(users.begin(), users.end(), std::size_t{0});

  AttackSpec spec;  // none
  CraftResult r = craft_dataset(a, w, spec, users, 11);
  CHECK(r.label == 0);
  CHECK(r.report.family == "none");
  CHECK(r.report.achieved_frequency == 0.0);
  CHECK(r.report.mean_delta_l2 == 0.0);
  REQUIRE(r.trajectories.size() == users.size());
  for (const Trajectory& t : r.trajectories) {
    for (const TrajectoryStep& s : t.steps) {
      CHECK_FALSE(s.attacked);
      CHECK(s.delta_norm == 0.0);
    }
  }

  Rng env(derive_seed(11, "craft-env", 5));
  RolloutConfig rc;
  rc.greedy = true;
  Trajectory direct = rollout(agent_logits_fn(a), w, 5, rc, env);
  CHECK(same_trajectory(r.trajectories[5], direct));
}

TEST_CASE("craft with the always scheduler attacks every step") {
  World w = small_world();
  Agent a = make_agent(50, 16, 8, 16, "actor_critic", 3);
  std::vector<std::size_t> users(w.table.users.size());
  std::iota(users.begin(), users.end(), std::size_t{0});

  AttackSpec spec;
  spec.family = AttackFamily::kFgsmLinf;
  spec.epsilon = 0.25;
  CraftResult r = craft_dataset(a, w, spec, users, 11);
  CHECK(r.label == 1);
  CHECK(r.report.achieved_frequency == 1.0);
  CHECK(r.report.mean_delta_linf == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(r.report.mean_delta_l2 > 0.25);
  for (const Trajectory& t : r.trajectories) {
    for (const TrajectoryStep& s : t.steps) {
      CHECK(s.attacked);
      CHECK(s.delta_norm > 0.0);
    }
  }
}

TEST_CASE("craft skips steps whose value gradient vanishes") {
  World w = small_world();
  Agent a = make_agent(50, 16, 8, 16, "actor_critic", 3);
  a.params.at("value.l1.w") = Tensor(Shape{16, 24});
  a.params.at("value.l2.w") = Tensor(Shape{1, 16});
  std::vector<std::size_t> users{0, 1, 2, 3};

  AttackSpec spec;
  spec.family = AttackFamily::kFgsmL1;
  spec.epsilon = 0.5;
  CraftResult r = craft_dataset(a, w, spec, users, 11);
  CHECK(r.label == 1);
  CHECK(r.report.achieved_frequency == 0.0);
  for (const Trajectory& t : r.trajectories) {
    for (const TrajectoryStep& s : t.steps) CHECK_FALSE(s.attacked);
  }
}

TEST_CASE("craft with a timed gate stays idle on a flat policy") {
  World w = small_world();
  Agent a = make_agent(50, 16, 8, 16, "actor_critic", 3);
  a.params.at("policy.l2.w") = Tensor(Shape{50, 16});
  std::vector<std::size_t> users{0, 1, 2, 3, 4};

  AttackSpec spec;
  spec.family = AttackFamily::kFgsmLinf;
  spec.epsilon = 0.25;
  spec.scheduler = SchedulerKind::kTimed;
  spec.threshold = 0.99;
  CraftResult r = craft_dataset(a, w, spec, users, 11);
  CHECK(r.report.achieved_frequency == 0.0);
  CHECK(r.label == 1);
}

TEST_CASE("craft random scheduler hits roughly its frequency and replays exactly") {
  World w = small_world();
  Agent a = make_agent(50, 16, 8, 16, "actor_critic", 3);
  std::vector<std::size_t> users(w.table.users.size());
  std::iota(users.begin(), users.end(), std::size_t{0});

  AttackSpec spec;
  spec.family = AttackFamily::kFgsmL2;
  spec.epsilon = 0.1;
  spec.scheduler = SchedulerKind::kRandom;
  spec.p_freq = 0.5;
  CraftResult r1 = craft_dataset(a, w, spec, users, 13);
  CHECK(r1.report.achieved_frequency > 0.3);
  CHECK(r1.report.achieved_frequency < 0.7);

  CraftResult r2 = craft_dataset(a, w, spec, users, 13);
  CHECK(r1.report.achieved_frequency == r2.report.achieved_frequency);
  REQUIRE(r1.trajectories.size() == r2.trajectories.size());
  for (std::size_t i = 0; i < r1.trajectories.size(); ++i) {
    CHECK(same_trajectory(r1.trajectories[i], r2.trajectories[i]));
  }
}

TEST_CASE("craft results do not depend on the worker count") {
  World w = small_world();
  Agent a = make_agent(50, 16, 8, 16, "actor_critic", 3);
  std::vector<std::size_t> users(w.table.users.size());
  std::iota(users.begin(), users.end(), std::size_t{0});

  AttackSpec spec;
  spec.family = AttackFamily::kDeepfool;
  spec.epsilon = 1.5;
  spec.deepfool_sample_k = 8;
  CraftResult serial = craft_dataset(a, w, spec, users, 17, 4, 1);
  CraftResult parallel = craft_dataset(a, w, spec, users, 17, 4, 4);
  CHECK(serial.report.achieved_frequency == parallel.report.achieved_frequency);
  CHECK(serial.report.mean_delta_l2 == parallel.report.mean_delta_l2);
  REQUIRE(serial.trajectories.size() == parallel.trajectories.size());
  for (std::size_t i = 0; i < serial.trajectories.size(); ++i) {
    CHECK(same_trajectory(serial.trajectories[i], parallel.trajectories[i]));
  }
}

TEST_CASE("craft keeps the caller's user order and rejects an empty list") {
  World w = small_world();
  Agent a = make_agent(50, 16, 8, 16, "actor_critic", 3);
  std::vector<std::size_t> users{7, 3, 19, 0};
  AttackSpec spec;
  CraftResult r = craft_dataset(a, w, spec, users, 11);
  REQUIRE(r.trajectories.size() == 4);
  for (std::size_t i = 0; i < users.size(); ++i) CHECK(r.trajectories[i].user == users[i]);

  CHECK_THROWS_AS(craft_dataset(a, w, spec, {}, 11), ConfigError);
}

TEST_CASE("attack report serializes every field as JSON") {
  AttackReport r;
  r.family = "fgsm_l2";
  r.epsilon = 0.1;
  r.scheduler = "random";
  r.achieved_frequency = 0.515;
  r.mean_delta_l1 = 0.3;
  r.mean_delta_l2 = 0.1;
  r.mean_delta_linf = 0.05;
  r.wall_time_s = 1.25;
  const std::string text = attack_report_to_json(r);
  CHECK(text.back() == '\n');
  nlohmann::json doc = nlohmann::json::parse(text);
  CHECK(doc.at("family") == "fgsm_l2");
  CHECK(doc.at("epsilon") == 0.1);
  CHECK(doc.at("scheduler") == "random");
  CHECK(doc.at("achieved_frequency") == 0.515);
  CHECK(doc.at("mean_delta_l1") == 0.3);
  CHECK(doc.at("mean_delta_l2") == 0.1);
  CHECK(doc.at("mean_delta_linf") == 0.05);
  CHECK(doc.at("wall_time_s") == 1.25);
}

}  // TEST_SUITE
