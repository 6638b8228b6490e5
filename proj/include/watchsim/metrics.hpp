#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "watchsim/addiction.hpp"
#include "watchsim/corpus.hpp"
#include "watchsim/reward.hpp"
#include "watchsim/types.hpp"

namespace watchsim {

enum class MetricUnit { consumption, seconds };

MetricUnit metric_unit_from_string(const std::string& s);
const char* to_string(MetricUnit unit);

struct MetricsReport {
  double session_mae = 0.0;
  double session_rmse = 0.0;
  double video_mae = 0.0;
  double video_rmse = 0.0;
  MetricUnit unit = MetricUnit::consumption;
  std::size_t n_sessions = 0;
  std::size_t n_videos = 0;
};

// Session level compares per-session totals; video level compares items.
// Predictions must align one-to-one with the logged videos per session.
std::pair<double, double> session_metrics(
    const std::vector<std::vector<double>>& pred,
    const std::vector<std::vector<double>>& truth);

std::pair<double, double> video_metrics(
    const std::vector<std::vector<double>>& pred,
    const std::vector<std::vector<double>>& truth);

// Both levels at once; seconds mode inverts the consumption transform per
// video before comparing.
MetricsReport compute_metrics(const std::vector<std::vector<double>>& pred,
                              const std::vector<std::vector<double>>& truth,
                              MetricUnit unit = MetricUnit::consumption);

// Logged consumption per session, aligned with dataset.sessions.
std::vector<std::vector<double>> logged_consumption(const Dataset& dataset);

// Rank-based AUC with tie correction.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Type-7 (linear interpolation) quantile of a sample.
double quantile(std::vector<double> values, double p);

// Refits the addiction model on each train fold; targets come from the one
// ctr source for every fold.
std::vector<AddictionParams> crossval_addiction(const Dataset& dataset,
                                                std::size_t k,
                                                std::uint64_t seed,
                                                const CtrFn& ctr,
                                                const FitOptions& options = {});

struct CohortGroupStats {
  std::string key;
  AddictionParams mean_params;  // mean of per-user fits
  AddictionMetrics metrics;     // derived from the mean params
  double addicted_share = 0.0;  // fraction of users with w above the threshold
  std::size_t user_count = 0;
  std::size_t fallback_count = 0;
};

struct CohortBreakdown {
  std::string grouping;  // "frequency" or an attribute name
  std::vector<CohortGroupStats> groups;
  std::vector<std::string> warnings;
};

// Per-user fits (with shared-parameter fallback) aggregated by frequency
// group or by a user attribute. addicted_threshold is the zero band for the
// addicted-share count.
CohortBreakdown cohort_breakdown(const Dataset& dataset,
                                 const std::string& grouping, const CtrFn& ctr,
                                 const AddictionParams& shared,
                                 const FitOptions& options = {},
                                 double addicted_threshold = 0.05,
                                 GroupThresholds thresholds = {});

}  // namespace watchsim
