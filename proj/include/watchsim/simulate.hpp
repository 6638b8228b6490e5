#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "watchsim/addiction.hpp"
#include "watchsim/policy.hpp"
#include "watchsim/rerank.hpp"
#include "watchsim/reward.hpp"
#include "watchsim/types.hpp"

namespace watchsim {

enum class PredictionMode { greedy, sample };

PredictionMode prediction_mode_from_string(const std::string& s);

struct SimulationConfig {
  PredictionMode mode = PredictionMode::greedy;
  std::uint64_t seed = 0;
  double sigma = 0.9;
  StockMode stock_mode = StockMode::recurrence;
  GroupThresholds thresholds;
  double ridge_lambda = 1e-8;
};

struct SimulatedSession {
  Session reranked;                 // permuted item order actually exposed
  std::vector<double> predicted_c;  // policy consumption per item
};

// Steps the policy through each re-ranked session; the context stock evolves
// from the predictions themselves. greedy_swap specs need scores (ctr is used
// when provided).
std::vector<SimulatedSession> simulate_sessions(const Dataset& dataset,
                                                const BinnedPolicy& policy,
                                                const RerankSpec& spec,
                                                const SimulationConfig& cfg,
                                                const CtrFn* scores = nullptr);

struct MethodReport {
  RerankSpec spec;
  AddictionParams params;  // refit on the simulated sessions
  AddictionMetrics metrics;
  std::map<std::string, double> exposure;  // position-weighted, per category
  std::vector<CurvePoint> mean_curve;      // aggregate cumulative curve
  std::vector<SimulatedSession> sessions;
  double mean_predicted_c = 0.0;
};

struct SimulationReport {
  std::vector<MethodReport> methods;  // methods[0] is the identity baseline
  const MethodReport& baseline() const { return methods.front(); }
};

// Runs every spec (the first must be identity), refits the addiction model on
// simulated consumption with ctr + simulated-completion targets, and reports
// degree, peak minutes, and exposure per method.
SimulationReport measure_addiction_shift(const Dataset& dataset,
                                         const BinnedPolicy& policy,
                                         const std::vector<RerankSpec>& specs,
                                         const CtrFn& ctr,
                                         const SimulationConfig& cfg);

}  // namespace watchsim
