#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "watchsim/policy.hpp"
#include "watchsim/reward.hpp"
#include "watchsim/types.hpp"

namespace watchsim {

enum class TrainStage { stage1, stage2 };
const char* to_string(TrainStage stage);

struct TrainConfig {
  double epsilon = 0.3;  // clip range, in (0, 1)
  double beta = 0.9;     // KL coefficient, >= 0
  std::size_t group_size = 8;
  std::size_t iterations = 100;
  double learning_rate = 2e-5;
  TrainStage stage = TrainStage::stage1;
  std::uint64_t seed = 0;
  std::size_t sessions_per_iter = 0;  // 0 = every session each iteration
};

void validate(const TrainConfig& cfg);

// One sampled (session, member, step) with everything the surrogate needs.
struct RolloutStep {
  PolicyContext ctx;
  std::size_t bin = 0;
  double log_prob_old = 0.0;
  double advantage = 0.0;
  double reward = 0.0;  // allocated per-video reward
};

struct RolloutBatch {
  std::vector<RolloutStep> steps;
  double session_total_sum = 0.0;  // across members, for logging
  std::size_t member_count = 0;

  double mean_session_reward() const {
    return member_count == 0 ? 0.0
                             : session_total_sum /
                                   static_cast<double>(member_count);
  }
};

// Teacher-forced on the logged item order: each group member samples its own
// consumption path from pi_old, evolves its own stock, is scored with the
// stage's addiction params, and gets eta-allocated rewards standardized per
// step group.
RolloutBatch rollout_session(const PolicySnapshot& pi_old,
                             const Session& session,
                             const AddictionParams& params,
                             const TrainConfig& cfg,
                             const RewardConfig& reward_cfg, UserGroup group,
                             std::size_t session_index);

struct GrpoLoss {
  double objective = 0.0;  // to maximize
  double mean_kl = 0.0;
  std::vector<double> grad;  // same layout as policy weights
};

// Clipped group-relative surrogate minus beta * KL(pi_theta || pi_ref),
// averaged over the batch; KL computed in closed form over the bins.
GrpoLoss grpo_loss(const BinnedPolicy& policy, const PolicySnapshot& pi_ref,
                   const RolloutBatch& batch, const TrainConfig& cfg);

// sum p_i log(p_i / q_i), with 0 log 0 = 0.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

struct TrainLogEntry {
  std::size_t iter = 0;
  TrainStage stage = TrainStage::stage1;
  double objective = 0.0;
  double mean_kl = 0.0;
  double mean_reward = 0.0;
  long long wallclock_ms = 0;
};

struct M2aConfig {
  TrainConfig stage1;
  TrainConfig stage2;
  RewardConfig reward;
  bool run_stage1 = true;   // --no-stage1 clears this
  bool run_stage2 = true;   // --no-stage2 clears this
  std::size_t bins = 32;
  double c_max = 4.0;
};

struct TrainResult {
  BinnedPolicy policy{32, 4.0, 1.0};
  std::vector<TrainLogEntry> log;
};

// Two-stage schedule: stage 1 against shared-parameter rewards with pi_ref =
// the initial policy, stage 2 continues from the stage-1 result with pi_ref
// reset to it and per-user rewards. Deterministic per stage seeds.
TrainResult train_m2a(const Dataset& dataset, const M2aConfig& cfg,
                      const AddictionParams& shared,
                      const std::map<std::string, PersonalizedParams>& personalized,
                      const std::map<std::string, UserGroup>& groups);

}  // namespace watchsim
