#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "watchsim/addiction.hpp"
#include "watchsim/types.hpp"

namespace watchsim {

enum class LogFormat { csv, jsonl };

LogFormat format_from_string(const std::string& s);
LogFormat format_from_path(const std::string& path);

// Reads records in file order. Malformed rows raise ParseError with the
// line number; schema violations raise ValidationError naming the field.
std::vector<InteractionRecord> load_interactions(const std::string& path,
                                                 LogFormat format);

void save_interactions(const std::string& path, LogFormat format,
                       const std::vector<InteractionRecord>& records);

// Drops users with fewer than min_interactions records.
std::vector<InteractionRecord> filter_min_interactions(
    std::vector<InteractionRecord> records, std::size_t min_interactions = 5);

constexpr double kDefaultSessionGap = 3600.0;  // seconds

// Groups records per user (first-appearance order), sorts by timestamp
// (stable), and opens a new session whenever the gap exceeds session_gap.
Dataset segment_sessions(const std::vector<InteractionRecord>& records,
                         double session_gap = kDefaultSessionGap);

// --- synthetic data ------------------------------------------------------

struct CohortSpec {
  std::string name;
  double a = 2.0;
  double b = 1.0;
  double w = 0.0;
  double category_coupling = 0.0;  // in [0, 1]
  std::size_t user_count = 0;
  std::size_t sessions_per_user = 0;
  double mean_session_length = 0.0;
};

struct SyntheticSpec {
  std::vector<CohortSpec> cohorts;
  double noise_sd = 0.0;  // drives both consumption and target noise
  std::uint64_t seed = 0;
  double sigma = 0.9;
  double c_max = 4.0;
  StockMode stock_mode = StockMode::recurrence;
  GroupThresholds thresholds;
};

// Per-step consumption is drawn around clip((a + w*T)/b, 0, c_max) with
// truncated-normal noise; watch_time = 10^C - 1. Clicks follow a logistic
// model on planted feature weights, and video_length is chosen so that
// (true click probability + completion rate) equals the planted quadratic
// utility plus gaussian target noise. Deterministic per seed.
Dataset generate_synthetic(const SyntheticSpec& spec);

// The click model planted by generate_synthetic, reconstructible from the
// seed alone so oracle preference targets survive file round-trips.
class PlantedClickModel {
 public:
  explicit PlantedClickModel(std::uint64_t seed);

  double ctr(const InteractionRecord& rec, UserGroup group) const;
  // Raw logit, used by separability tests.
  double margin(const InteractionRecord& rec, UserGroup group) const;

  static const std::vector<std::string>& category_vocab();
  static constexpr std::size_t kItemBuckets = 16;

 private:
  std::vector<double> category_weights_;
  std::vector<double> group_weights_;
  std::vector<double> bucket_weights_;
};

// Oracle regression targets: planted ctr + completion rate, aligned with
// dataset.flatten() order.
std::vector<double> planted_preference_targets(const Dataset& dataset,
                                               std::uint64_t seed,
                                               const GroupThresholds& t = {});

// --- evaluation splits ---------------------------------------------------

struct Fold {
  Dataset train;
  Dataset test;
};

// Partitions sessions into k folds uniformly at random; fold i is the test
// set of split i. Deterministic per seed.
std::vector<Fold> split_folds(const Dataset& dataset, std::size_t k,
                              std::uint64_t seed);

}  // namespace watchsim
