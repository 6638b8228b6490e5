#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "watchsim/addiction.hpp"
#include "watchsim/types.hpp"

namespace watchsim {

struct RewardConfig {
  double sigma = 0.9;      // stock depreciation, in (0, 1)
  double phi = 1.0;        // within-session temporal discount, in (0, 1]
  double eta = 0.9;        // allocation discount, in [0, 1]
  std::size_t group_size = 8;  // G >= 2
  double std_floor = 1e-8;
  bool population_std = false;  // divisor G instead of G-1
  bool sparse = false;  // session reward assigned only to the last video
  StockMode stock_mode = StockMode::recurrence;
};

void validate(const RewardConfig& cfg);

// sum_{j=1..n} phi^j * u(C_j, T_j), 1-based discount exponent.
double session_reward(const AddictionParams& params,
                      const ConsumptionSeries& series, double phi);

// out[j] = eta^(n_s - j) * session_total for 1-based j; the last video
// receives the full session reward.
std::vector<double> allocate_rewards(double session_total, std::size_t n_s,
                                     double eta);

struct GroupAdvantage {
  std::vector<double> rewards;
  std::vector<double> advantages;  // mean-zero unless the group is degenerate
};

GroupAdvantage group_advantages(const std::vector<double>& rewards,
                                double std_floor = 1e-8,
                                bool population_std = false);

// Predicted click-through probability for a record; both the trained model
// and the synthetic oracle satisfy this shape.
using CtrFn = std::function<double(const InteractionRecord&)>;

// Per-session series plus aligned regression targets (ctr + completion).
struct RegressionData {
  std::vector<ConsumptionSeries> series;       // one per session
  std::vector<std::vector<double>> targets;    // aligned with series
  std::vector<double> flat_targets;
  std::vector<double> flat_c;
  std::vector<double> flat_stock;
};

RegressionData build_regression_data(const Dataset& dataset, const CtrFn& ctr,
                                     double sigma,
                                     StockMode mode = StockMode::recurrence);

struct FitOptions {
  double sigma = 0.9;
  StockMode stock_mode = StockMode::recurrence;
  double ridge_lambda = 1e-8;
  std::size_t min_obs = 9;  // below this a user falls back to shared params
};

struct PersonalizedParams {
  AddictionParams params;
  bool used_fallback = false;
};

// Same solve as fit_addiction restricted to one user's sessions; users below
// min_obs fall back to the shared parameters with the flag set.
PersonalizedParams fit_personalized(const Dataset& dataset,
                                    const std::string& user_id,
                                    const CtrFn& ctr,
                                    const AddictionParams& shared,
                                    const FitOptions& options);

std::map<std::string, PersonalizedParams> fit_all_personalized(
    const Dataset& dataset, const CtrFn& ctr, const AddictionParams& shared,
    const FitOptions& options);

}  // namespace watchsim
