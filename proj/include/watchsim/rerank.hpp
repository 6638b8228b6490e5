#pragma once

#include <optional>
#include <string>
#include <vector>

#include "watchsim/types.hpp"

namespace watchsim {

enum class RerankMethod { identity, round_robin, maxmin_exposure, greedy_swap };

RerankMethod rerank_method_from_string(const std::string& s);
const char* to_string(RerankMethod method);

struct RerankSpec {
  RerankMethod method = RerankMethod::identity;
  std::optional<std::size_t> top_k;   // restrict re-ranking to this prefix
  double score_loss_budget = 0.0;     // greedy_swap only
};

// Permutes a session's items to balance top-level category exposure.
//   identity:        unchanged
//   round_robin:     stable interleave over categories in first-appearance order
//   maxmin_exposure: greedily pick the least-exposed category next, ties by
//                    original order
//   greedy_swap:     adjacent-swap hill-climb on position-weighted exposure
//                    Gini, spending at most score_loss_budget of rank-weighted
//                    score (scores required)
Session rerank(const Session& session, const RerankSpec& spec,
               const std::vector<double>* scores = nullptr);

// Position weight used for weighted exposure and swap-loss accounting.
double position_weight(std::size_t position);

// Gini coefficient of per-category position-weighted exposure.
double exposure_gini(const Session& session);

// Largest (max - min) raw category exposure count over all prefixes.
double max_prefix_exposure_spread(const Session& session);

}  // namespace watchsim
