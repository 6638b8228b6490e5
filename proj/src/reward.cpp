#include "watchsim/reward.hpp"

#include <cmath>

#include "watchsim/errors.hpp"

namespace watchsim {

void validate(const RewardConfig& cfg) {
  if (cfg.sigma <= 0.0 || cfg.sigma >= 1.0) {
    throw ValidationError("reward config: sigma must lie in (0, 1)");
  }
  if (cfg.phi <= 0.0 || cfg.phi > 1.0) {
    throw ValidationError("reward config: phi must lie in (0, 1]");
  }
  if (cfg.eta < 0.0 || cfg.eta > 1.0) {
    throw ValidationError("reward config: eta must lie in [0, 1]");
  }
  if (cfg.group_size < 2) {
    throw ValidationError("reward config: group_size must be >= 2");
  }
  if (!(cfg.std_floor > 0.0)) {
    throw ValidationError("reward config: std_floor must be > 0");
  }
}

double session_reward(const AddictionParams& params,
                      const ConsumptionSeries& series, double phi) {
  if (phi <= 0.0 || phi > 1.0) {
    throw ValidationError("session_reward: phi must lie in (0, 1]");
  }
  double total = 0.0;
  double weight = 1.0;
  for (std::size_t j = 0; j < series.c.size(); ++j) {
    weight *= phi;
    total += weight * utility(params, series.c[j], series.stock[j]);
  }
  return total;
}

std::vector<double> allocate_rewards(double session_total, std::size_t n_s,
                                     double eta) {
  if (n_s == 0) throw ValidationError("allocate_rewards: n_s must be >= 1");
  if (eta < 0.0 || eta > 1.0) {
    throw ValidationError("allocate_rewards: eta must lie in [0, 1]");
  }
  std::vector<double> out(n_s);
  double weight = 1.0;
  for (std::size_t j = n_s; j-- > 0;) {
    out[j] = weight * session_total;
    weight *= eta;
  }
  return out;
}

GroupAdvantage group_advantages(const std::vector<double>& rewards,
                                double std_floor, bool population_std) {
  if (rewards.size() < 2) {
    throw ValidationError("group_advantages: need at least 2 rewards");
  }
  GroupAdvantage out;
  out.rewards = rewards;
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / (population_std ? n : n - 1.0));
  out.advantages.resize(rewards.size(), 0.0);
  if (sd > std_floor) {
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      out.advantages[i] = (rewards[i] - mean) / sd;
    }
  }
  return out;
}

RegressionData build_regression_data(const Dataset& dataset, const CtrFn& ctr,
                                     double sigma, StockMode mode) {
  RegressionData data;
  data.series.reserve(dataset.sessions.size());
  data.targets.reserve(dataset.sessions.size());
  for (const auto& session : dataset.sessions) {
    std::vector<double> c;
    std::vector<double> targets;
    c.reserve(session.records.size());
    targets.reserve(session.records.size());
    for (const auto& rec : session.records) {
      c.push_back(consumption_transform(rec.watch_time));
      targets.push_back(ctr(rec) + rec.completion_rate());
    }
    auto series = make_series(c, sigma, mode);
    data.flat_targets.insert(data.flat_targets.end(), targets.begin(),
                             targets.end());
    data.flat_c.insert(data.flat_c.end(), series.c.begin(), series.c.end());
    data.flat_stock.insert(data.flat_stock.end(), series.stock.begin(),
                           series.stock.end());
    data.series.push_back(std::move(series));
    data.targets.push_back(std::move(targets));
  }
  return data;
}

PersonalizedParams fit_personalized(const Dataset& dataset,
                                    const std::string& user_id,
                                    const CtrFn& ctr,
                                    const AddictionParams& shared,
                                    const FitOptions& options) {
  Dataset restricted;
  restricted.provenance = dataset.provenance;
  restricted.seed = dataset.seed;
  for (const auto& session : dataset.sessions) {
    if (session.user_id == user_id) restricted.sessions.push_back(session);
  }
  if (restricted.sessions.empty()) {
    throw ValidationError("fit_personalized: unknown user " + user_id);
  }
  PersonalizedParams out;
  if (restricted.record_count() < options.min_obs) {
    out.params = shared;
    out.used_fallback = true;
    return out;
  }
  auto data = build_regression_data(restricted, ctr, options.sigma,
                                    options.stock_mode);
  out.params = fit_addiction(data.flat_targets, data.flat_c, data.flat_stock,
                             options.ridge_lambda);
  return out;
}

std::map<std::string, PersonalizedParams> fit_all_personalized(
    const Dataset& dataset, const CtrFn& ctr, const AddictionParams& shared,
    const FitOptions& options) {
  std::map<std::string, PersonalizedParams> out;
  for (const auto& user : dataset.user_ids()) {
    out.emplace(user, fit_personalized(dataset, user, ctr, shared, options));
  }
  return out;
}

}  // namespace watchsim
