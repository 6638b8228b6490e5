#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "watchsim/corpus.hpp"
#include "watchsim/errors.hpp"
#include "watchsim/grpo.hpp"
#include "watchsim/rng.hpp"

using namespace watchsim;

TEST_CASE("kl divergence") {
  CHECK(kl_divergence({0.3, 0.7}, {0.3, 0.7}) == doctest::Approx(0.0));
  CHECK(kl_divergence({1.0, 0.0}, {0.5, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(kl_divergence({1.0}, {0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(kl_divergence({0.5, 0.5}, {1.0, 0.0}), ValidationError);

  RngStream rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> p(6), q(6);
    double ps = 0.0, qs = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      p[i] = rng.next_double() + 1e-3;
      q[i] = rng.next_double() + 1e-3;
      ps += p[i];
      qs += q[i];
    }
    for (std::size_t i = 0; i < 6; ++i) {
      p[i] /= ps;
      q[i] /= qs;
    }
    CHECK(kl_divergence(p, q) >= 0.0);
  }
}

namespace {

// Single-step batch with a known ratio: pi_old is uniform over 2 bins and the
// policy puts 0.75 on bin 0, so the bin-0 ratio is exactly 1.5.
RolloutStep ratio_step(double advantage) {
  RolloutStep step;
  step.ctx = PolicyContext{};  // zero stock, no match, zero length
  step.bin = 0;
  step.log_prob_old = std::log(0.5);
  step.advantage = advantage;
  step.reward = advantage;
  return step;
}

BinnedPolicy three_quarters_policy() {
  BinnedPolicy policy(2, 4.0);
  policy.weights()[0] = std::log(3.0);  // bias weight of bin 0
  return policy;
}

}  // namespace

TEST_CASE("clipping unit cases") {
  auto policy = three_quarters_policy();
  CHECK(policy.probs(PolicyContext{})[0] == doctest::Approx(0.75));

  TrainConfig cfg;
  cfg.epsilon = 0.3;
  cfg.beta = 0.0;

  RolloutBatch batch;
  batch.steps = {ratio_step(+1.0)};
  PolicySnapshot ref(policy);
  auto loss = grpo_loss(policy, ref, batch, cfg);
  CHECK(loss.objective == doctest::Approx(1.3));  // min(1.5, 1.3)

  batch.steps = {ratio_step(-1.0)};
  loss = grpo_loss(policy, ref, batch, cfg);
  CHECK(loss.objective == doctest::Approx(-1.5));  // min(-1.5, -1.3)
}

TEST_CASE("identical policies yield zero objective and zero KL") {
  SyntheticSpec spec;
  spec.cohorts.push_back({"g", 2.0, 1.0, 0.3, 0.3, 4, 3, 8.0});
  spec.noise_sd = 0.05;
  spec.seed = 2;
  auto dataset = generate_synthetic(spec);

  BinnedPolicy policy(8, 4.0);
  RngStream rng(5);
  for (auto& w : policy.weights()) w = rng.next_gaussian(0.0, 0.3);
  PolicySnapshot snap(policy);

  TrainConfig cfg;
  cfg.group_size = 4;
  cfg.seed = 9;
  RewardConfig reward_cfg;
  AddictionParams params{2.0, 1.0, 0.3};

  RolloutBatch batch;
  for (std::size_t i = 0; i < dataset.sessions.size(); ++i) {
    auto part = rollout_session(snap, dataset.sessions[i], params, cfg,
                                reward_cfg, UserGroup::low, i);
    batch.steps.insert(batch.steps.end(), part.steps.begin(), part.steps.end());
  }
  auto loss = grpo_loss(policy, snap, batch, cfg);
  // pi = pi_old: every ratio is 1, so the surrogate reduces to the mean
  // advantage, which is zero by construction.
  CHECK(std::fabs(loss.objective) < 1e-9);
  CHECK(loss.mean_kl == doctest::Approx(0.0));
}

TEST_CASE("rollout mechanics") {
  AddictionParams params{2.0, 1.0, 0.4};
  TrainConfig cfg;
  cfg.group_size = 6;
  cfg.seed = 31;
  RewardConfig reward_cfg;

  InteractionRecord rec;
  rec.user_id = "u";
  rec.item_id = "v9";
  rec.timestamp = 0.0;
  rec.watch_time = 50.0;
  rec.video_length = 100.0;
  rec.categories = {"music"};

  SUBCASE("near-deterministic old policy gives all-zero advantages") {
    BinnedPolicy sharp(8, 4.0);
    sharp.weights()[2 * kPolicyFeatureCount] = 60.0;
    PolicySnapshot snap(sharp);
    Session session{"u", {rec, rec, rec}};
    auto batch = rollout_session(snap, session, params, cfg, reward_cfg,
                                 UserGroup::low, 0);
    REQUIRE(batch.steps.size() == 3 * 6);
    for (const auto& step : batch.steps) {
      CHECK(step.bin == 2);
      CHECK(step.advantage == 0.0);
    }
  }

  SUBCASE("single-video session at phi = eta = 1 rewards raw utility") {
    BinnedPolicy uniform(8, 4.0);
    PolicySnapshot snap(uniform);
    RewardConfig rc;
    rc.phi = 1.0;
    rc.eta = 1.0;
    Session session{"u", {rec}};
    auto batch = rollout_session(snap, session, params, cfg, rc,
                                 UserGroup::medium, 3);
    REQUIRE(batch.steps.size() == 6);
    for (const auto& step : batch.steps) {
      const double c = uniform.bin_center(step.bin);
      CHECK(step.reward == doctest::Approx(utility(params, c, 0.0)));
      CHECK(step.ctx.stock == doctest::Approx(0.0));
      CHECK(step.ctx.history_len == 0);
    }
  }

  SUBCASE("equal stage parameters reproduce identical rewards") {
    BinnedPolicy uniform(8, 4.0);
    PolicySnapshot snap(uniform);
    Session session{"u", {rec, rec}};
    auto stage1 = rollout_session(snap, session, params, cfg, reward_cfg,
                                  UserGroup::low, 7);
    auto stage2 = rollout_session(snap, session, params, cfg, reward_cfg,
                                  UserGroup::low, 7);
    REQUIRE(stage1.steps.size() == stage2.steps.size());
    for (std::size_t i = 0; i < stage1.steps.size(); ++i) {
      CHECK(stage1.steps[i].bin == stage2.steps[i].bin);
      CHECK(stage1.steps[i].reward == stage2.steps[i].reward);
      CHECK(stage1.steps[i].advantage == stage2.steps[i].advantage);
    }
  }

  SUBCASE("step groups are mean-zero across members") {
    BinnedPolicy uniform(8, 4.0);
    PolicySnapshot snap(uniform);
    Session session{"u", {rec, rec, rec, rec}};
    auto batch = rollout_session(snap, session, params, cfg, reward_cfg,
                                 UserGroup::high, 11);
    const std::size_t n = 4, members = 6;
    for (std::size_t j = 0; j < n; ++j) {
      double mean = 0.0;
      bool degenerate = true;
      for (std::size_t g = 0; g < members; ++g) {
        mean += batch.steps[g * n + j].advantage;
        if (batch.steps[g * n + j].advantage != 0.0) degenerate = false;
      }
      if (!degenerate) CHECK(std::fabs(mean / members) < 1e-9);
    }
  }

  SUBCASE("sparse allocation rewards only the final video") {
    BinnedPolicy uniform(8, 4.0);
    PolicySnapshot snap(uniform);
    RewardConfig rc;
    rc.sparse = true;
    Session session{"u", {rec, rec, rec}};
    auto batch = rollout_session(snap, session, params, cfg, rc,
                                 UserGroup::low, 13);
    const std::size_t n = 3;
    for (std::size_t g = 0; g < cfg.group_size; ++g) {
      CHECK(batch.steps[g * n + 0].reward == 0.0);
      CHECK(batch.steps[g * n + 0].advantage == 0.0);
      CHECK(batch.steps[g * n + 1].reward == 0.0);
    }
  }
}

TEST_CASE("grpo gradient matches central finite differences") {
  SyntheticSpec spec;
  spec.cohorts.push_back({"fd", 2.0, 1.0, 0.3, 0.4, 3, 2, 6.0});
  spec.noise_sd = 0.05;
  spec.seed = 13;
  auto dataset = generate_synthetic(spec);

  BinnedPolicy pi_old(6, 4.0);
  RngStream rng(7);
  for (auto& w : pi_old.weights()) w = rng.next_gaussian(0.0, 0.2);
  PolicySnapshot old_snap(pi_old);

  BinnedPolicy pi_ref(6, 4.0);
  for (auto& w : pi_ref.weights()) w = rng.next_gaussian(0.0, 0.2);
  PolicySnapshot ref_snap(pi_ref);

  TrainConfig cfg;
  cfg.group_size = 4;
  cfg.seed = 17;
  cfg.epsilon = 0.3;
  cfg.beta = 0.9;
  RewardConfig reward_cfg;
  AddictionParams params{2.0, 1.0, 0.3};

  RolloutBatch batch;
  for (std::size_t i = 0; i < dataset.sessions.size(); ++i) {
    auto part = rollout_session(old_snap, dataset.sessions[i], params, cfg,
                                reward_cfg, UserGroup::low, i);
    batch.steps.insert(batch.steps.end(), part.steps.begin(), part.steps.end());
  }

  // Evaluate away from pi_old so the ratios are not all 1.
  BinnedPolicy policy = pi_old;
  for (auto& w : policy.weights()) w += rng.next_gaussian(0.0, 0.15);

  auto loss = grpo_loss(policy, ref_snap, batch, cfg);
  RngStream pick(29);
  double max_rel_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t i = pick.next_below(policy.weights().size());
    const double h = 1e-6 * std::max(1.0, std::fabs(policy.weights()[i]));
    const double saved = policy.weights()[i];
    policy.weights()[i] = saved + h;
    const double up = grpo_loss(policy, ref_snap, batch, cfg).objective;
    policy.weights()[i] = saved - h;
    const double down = grpo_loss(policy, ref_snap, batch, cfg).objective;
    policy.weights()[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::fabs(loss.grad[i] - fd) /
                       std::max({std::fabs(loss.grad[i]), std::fabs(fd), 1e-8});
    max_rel_err = std::max(max_rel_err, rel);
  }
  CHECK(max_rel_err < 1e-4);
}

TEST_CASE("one small ascent step increases the surrogate") {
  SyntheticSpec spec;
  spec.cohorts.push_back({"asc", 2.0, 1.0, 0.4, 0.2, 4, 3, 8.0});
  spec.noise_sd = 0.05;
  spec.seed = 41;
  auto dataset = generate_synthetic(spec);

  BinnedPolicy policy(8, 4.0);
  RngStream rng(43);
  for (auto& w : policy.weights()) w = rng.next_gaussian(0.0, 0.2);
  PolicySnapshot snap(policy);

  TrainConfig cfg;
  cfg.group_size = 6;
  cfg.seed = 47;
  cfg.beta = 0.0;
  cfg.epsilon = 0.99;
  RewardConfig reward_cfg;
  AddictionParams params{2.0, 1.0, 0.3};

  RolloutBatch batch;
  for (std::size_t i = 0; i < dataset.sessions.size(); ++i) {
    auto part = rollout_session(snap, dataset.sessions[i], params, cfg,
                                reward_cfg, UserGroup::low, i);
    batch.steps.insert(batch.steps.end(), part.steps.begin(), part.steps.end());
  }

  auto at_start = grpo_loss(policy, snap, batch, cfg);
  bool increased = false;
  for (double step : {1e-3, 1e-4}) {
    BinnedPolicy moved = policy;
    for (std::size_t i = 0; i < moved.weights().size(); ++i) {
      moved.weights()[i] += step * at_start.grad[i];
    }
    const double objective = grpo_loss(moved, snap, batch, cfg).objective;
    if (objective > at_start.objective) increased = true;
  }
  CHECK(increased);
}

namespace {

Dataset toy_bandit_dataset(std::size_t sessions) {
  Dataset dataset;
  dataset.provenance = "synthetic";
  InteractionRecord rec;
  rec.user_id = "toy";
  rec.item_id = "v1";
  rec.watch_time = 100.0;
  rec.video_length = 100.0;
  rec.categories = {"news"};
  for (std::size_t i = 0; i < sessions; ++i) {
    rec.timestamp = static_cast<double>(i) * 10000.0;
    dataset.sessions.push_back({"toy", {rec}});
  }
  return dataset;
}

}  // namespace

TEST_CASE("two-arm toy task concentrates on the better bin") {
  // Bins at C = 1 and C = 3; utility under (3, 1, 0) is 2.5 vs 4.5, so the
  // second bin is the exhaustively-better arm.
  auto dataset = toy_bandit_dataset(16);
  AddictionParams params{3.0, 1.0, 0.0};
  CHECK(utility(params, 3.0, 0.0) > utility(params, 1.0, 0.0));

  M2aConfig cfg;
  cfg.bins = 2;
  cfg.c_max = 4.0;
  cfg.run_stage2 = false;
  cfg.stage1.iterations = 500;
  cfg.stage1.learning_rate = 0.5;
  cfg.stage1.beta = 0.0;
  cfg.stage1.group_size = 8;
  cfg.stage1.seed = 53;
  cfg.reward.phi = 1.0;
  cfg.reward.eta = 1.0;

  std::map<std::string, UserGroup> groups{{"toy", UserGroup::low}};
  auto result = train_m2a(dataset, cfg, params, {}, groups);
  REQUIRE(result.log.size() == 500);

  PolicyContext ctx;
  ctx.user_group = UserGroup::low;
  ctx.log_length = std::log10(101.0);
  const auto probs = result.policy.probs(ctx);
  CHECK(probs[1] >= 0.8);
}

TEST_CASE("zero iterations return the initialization") {
  auto dataset = toy_bandit_dataset(4);
  M2aConfig cfg;
  cfg.bins = 4;
  cfg.stage1.iterations = 0;
  cfg.stage2.iterations = 0;
  std::map<std::string, UserGroup> groups{{"toy", UserGroup::low}};
  auto result = train_m2a(dataset, cfg, AddictionParams{2.0, 1.0, 0.0}, {}, groups);
  CHECK(result.policy == BinnedPolicy(4, 4.0));
  CHECK(result.log.empty());
}

TEST_CASE("training is deterministic per seed") {
  auto dataset = toy_bandit_dataset(6);
  M2aConfig cfg;
  cfg.bins = 4;
  cfg.run_stage2 = false;
  cfg.stage1.iterations = 20;
  cfg.stage1.learning_rate = 0.3;
  cfg.stage1.seed = 77;
  std::map<std::string, UserGroup> groups{{"toy", UserGroup::low}};
  AddictionParams params{2.5, 1.0, 0.0};
  auto a = train_m2a(dataset, cfg, params, {}, groups);
  auto b = train_m2a(dataset, cfg, params, {}, groups);
  CHECK(a.policy == b.policy);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].objective == b.log[i].objective);
    CHECK(a.log[i].mean_reward == b.log[i].mean_reward);
  }
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  validate(cfg);
  cfg.epsilon = 1.0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg.epsilon = 0.3;
  cfg.beta = -0.1;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg.beta = 0.9;
  cfg.group_size = 1;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
}
