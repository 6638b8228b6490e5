#include "watchsim/grpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "watchsim/errors.hpp"
#include "watchsim/rng.hpp"

namespace watchsim {

const char* to_string(TrainStage stage) {
  return stage == TrainStage::stage1 ? "stage1" : "stage2";
}

void validate(const TrainConfig& cfg) {
  if (cfg.epsilon <= 0.0 || cfg.epsilon >= 1.0) {
    throw ValidationError("train config: epsilon must lie in (0, 1)");
  }
  if (cfg.beta < 0.0) throw ValidationError("train config: beta must be >= 0");
  if (cfg.group_size < 2) {
    throw ValidationError("train config: group_size must be >= 2");
  }
  if (!(cfg.learning_rate > 0.0)) {
    throw ValidationError("train config: learning_rate must be > 0");
  }
}

namespace {
constexpr std::uint64_t kRolloutTag = 0x6011A7ULL;
}

RolloutBatch rollout_session(const PolicySnapshot& pi_old,
                             const Session& session,
                             const AddictionParams& params,
                             const TrainConfig& cfg,
                             const RewardConfig& reward_cfg, UserGroup group,
                             std::size_t session_index) {
  if (session.records.empty()) {
    throw ValidationError("rollout_session: empty session");
  }
  const std::size_t n = session.records.size();
  const std::size_t members = cfg.group_size;
  const std::uint64_t user_hash = stable_hash(session.user_id);

  RolloutBatch batch;
  batch.steps.reserve(n * members);
  batch.member_count = members;

  std::vector<std::vector<double>> allocations(members);
  std::vector<std::vector<RolloutStep>> trajectories(members);

  for (std::size_t g = 0; g < members; ++g) {
    std::vector<double> consumption;
    consumption.reserve(n);
    std::vector<RolloutStep>& traj = trajectories[g];
    traj.reserve(n);
    std::string prev_top;
    for (std::size_t j = 0; j < n; ++j) {
      const auto& rec = session.records[j];
      PolicyContext ctx;
      ctx.user_group = group;
      ctx.stock =
          stock_after(consumption, reward_cfg.sigma, reward_cfg.stock_mode);
      ctx.category_match = !prev_top.empty() && rec.top_category() == prev_top;
      ctx.log_length = std::log10(1.0 + rec.video_length);
      ctx.history_len = j;

      RngStream stream(
          mix_seed(cfg.seed, kRolloutTag, user_hash, session_index, j, g));
      auto sample = sample_consumption(pi_old.get(), ctx, stream);
      consumption.push_back(sample.c);
      traj.push_back({ctx, sample.bin, sample.log_prob, 0.0, 0.0});
      prev_top = rec.top_category();
    }
    auto series =
        make_series(consumption, reward_cfg.sigma, reward_cfg.stock_mode);
    const double total = session_reward(params, series, reward_cfg.phi);
    batch.session_total_sum += total;
    if (reward_cfg.sparse) {
      allocations[g].assign(n, 0.0);
      allocations[g].back() = total;
    } else {
      allocations[g] = allocate_rewards(total, n, reward_cfg.eta);
    }
  }

  // Standardize per step group across members.
  std::vector<double> step_rewards(members);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t g = 0; g < members; ++g) step_rewards[g] = allocations[g][j];
    auto adv = group_advantages(step_rewards, reward_cfg.std_floor,
                                reward_cfg.population_std);
    for (std::size_t g = 0; g < members; ++g) {
      trajectories[g][j].reward = step_rewards[g];
      trajectories[g][j].advantage = adv.advantages[g];
    }
  }
  for (auto& traj : trajectories) {
    batch.steps.insert(batch.steps.end(), traj.begin(), traj.end());
  }
  return batch;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw ValidationError("kl_divergence: dimension mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) {
      throw ValidationError("kl_divergence: q has a zero entry where p > 0");
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl < 0.0 ? 0.0 : kl;  // clamp tiny negative rounding
}

GrpoLoss grpo_loss(const BinnedPolicy& policy, const PolicySnapshot& pi_ref,
                   const RolloutBatch& batch, const TrainConfig& cfg) {
  validate(cfg);
  if (batch.steps.empty()) throw ValidationError("grpo_loss: empty batch");

  GrpoLoss out;
  out.grad.assign(policy.weights().size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.steps.size());
  const double inv_tau = 1.0 / policy.temperature();
  const std::size_t bins = policy.bins();

  for (const auto& step : batch.steps) {
    const auto lp = policy.log_probs(step.ctx);
    const auto ref_lp = pi_ref.get().log_probs(step.ctx);
    const auto features = policy_features(step.ctx);

    const double ratio = std::exp(lp[step.bin] - step.log_prob_old);
    if (!std::isfinite(ratio)) {
      std::ostringstream ctx_dump;
      ctx_dump << "grpo_loss: non-finite ratio (log_prob_old="
               << step.log_prob_old << ", log_prob=" << lp[step.bin]
               << ", stock=" << step.ctx.stock
               << ", history_len=" << step.ctx.history_len << ")";
      throw std::runtime_error(ctx_dump.str());
    }
    const double clipped =
        std::clamp(ratio, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
    const double unclipped_val = ratio * step.advantage;
    const double clipped_val = clipped * step.advantage;
    out.objective += inv_n * std::min(unclipped_val, clipped_val);

    double kl = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      kl += std::exp(lp[k]) * (lp[k] - ref_lp[k]);
    }
    if (kl < 0.0) kl = 0.0;
    out.mean_kl += inv_n * kl;

    // Surrogate gradient flows only when the min selects the unclipped branch
    // (the clip boundary zeroes it out otherwise).
    const bool pass_through = unclipped_val <= clipped_val;
    for (std::size_t k = 0; k < bins; ++k) {
      const double pk = std::exp(lp[k]);
      double coef = 0.0;
      if (pass_through) {
        const double indicator = (k == step.bin) ? 1.0 : 0.0;
        coef += inv_n * step.advantage * ratio * (indicator - pk) * inv_tau;
      }
      coef -= inv_n * cfg.beta * pk * ((lp[k] - ref_lp[k]) - kl) * inv_tau;
      if (coef != 0.0) {
        double* row = &out.grad[k * kPolicyFeatureCount];
        for (std::size_t f = 0; f < kPolicyFeatureCount; ++f) {
          row[f] += coef * features[f];
        }
      }
    }
  }
  out.objective -= cfg.beta * out.mean_kl;
  return out;
}

namespace {

struct StageRunner {
  const Dataset& dataset;
  const M2aConfig& cfg;
  const std::map<std::string, UserGroup>& groups;
  BinnedPolicy& policy;
  std::vector<TrainLogEntry>& log;

  void run(const TrainConfig& stage_cfg,
           const std::function<const AddictionParams&(const Session&)>& params_of,
           const PolicySnapshot& pi_ref) {
    validate(stage_cfg);
    const std::size_t n_sessions = dataset.sessions.size();
    std::vector<std::size_t> all(n_sessions);
    for (std::size_t i = 0; i < n_sessions; ++i) all[i] = i;

    for (std::size_t iter = 0; iter < stage_cfg.iterations; ++iter) {
      const auto started = std::chrono::steady_clock::now();
      PolicySnapshot pi_old(policy);

      std::vector<std::size_t> chosen;
      if (stage_cfg.sessions_per_iter == 0 ||
          stage_cfg.sessions_per_iter >= n_sessions) {
        chosen = all;
      } else {
        RngStream pick(mix_seed(stage_cfg.seed, 0x5E55ULL, iter));
        std::vector<std::size_t> pool = all;
        for (std::size_t i = 0; i < stage_cfg.sessions_per_iter; ++i) {
          std::size_t j = i + pick.next_below(pool.size() - i);
          std::swap(pool[i], pool[j]);
          chosen.push_back(pool[i]);
        }
        std::sort(chosen.begin(), chosen.end());
      }

      RolloutBatch batch;
      TrainConfig rollout_cfg = stage_cfg;
      rollout_cfg.seed = mix_seed(stage_cfg.seed, 0x17E2ULL, iter);
      for (std::size_t idx : chosen) {
        const Session& session = dataset.sessions[idx];
        auto it = groups.find(session.user_id);
        const UserGroup group =
            it == groups.end() ? UserGroup::low : it->second;
        auto part = rollout_session(pi_old, session, params_of(session),
                                    rollout_cfg, cfg.reward, group, idx);
        batch.steps.insert(batch.steps.end(), part.steps.begin(),
                           part.steps.end());
        batch.session_total_sum += part.session_total_sum;
        batch.member_count += part.member_count;
      }

      auto loss = grpo_loss(policy, pi_ref, batch, stage_cfg);
      auto& weights = policy.weights();
      for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] += stage_cfg.learning_rate * loss.grad[i];
      }

      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      log.push_back({iter, stage_cfg.stage, loss.objective, loss.mean_kl,
                     batch.mean_session_reward(), elapsed.count()});
    }
  }
};

}  // namespace

TrainResult train_m2a(const Dataset& dataset, const M2aConfig& cfg,
                      const AddictionParams& shared,
                      const std::map<std::string, PersonalizedParams>& personalized,
                      const std::map<std::string, UserGroup>& groups) {
  validate(cfg.reward);
  TrainResult result;
  result.policy = BinnedPolicy(cfg.bins, cfg.c_max);
  const PolicySnapshot initial(result.policy);

  StageRunner runner{dataset, cfg, groups, result.policy, result.log};

  if (cfg.run_stage1) {
    TrainConfig stage_cfg = cfg.stage1;
    stage_cfg.stage = TrainStage::stage1;
    runner.run(stage_cfg,
               [&shared](const Session&) -> const AddictionParams& {
                 return shared;
               },
               initial);
  }
  if (cfg.run_stage2) {
    TrainConfig stage_cfg = cfg.stage2;
    stage_cfg.stage = TrainStage::stage2;
    const PolicySnapshot ref(result.policy);  // stage-1 output (or init)
    runner.run(stage_cfg,
               [&](const Session& session) -> const AddictionParams& {
                 auto it = personalized.find(session.user_id);
                 return it == personalized.end() ? shared : it->second.params;
               },
               ref);
  }
  return result;
}

}  // namespace watchsim
