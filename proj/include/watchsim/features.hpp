#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "watchsim/types.hpp"

namespace watchsim {

// Sparse one-hot activation; indices are unique and within the space dim.
struct FeatureVector {
  std::vector<std::size_t> indices;
  std::vector<double> values;  // all 1.0 for one-hot fields
};

// Fixed one-hot layout over user-frequency group, top-level category,
// item-id bucket, and user attributes. Built once from a dataset and frozen;
// unseen categorical values map to a per-field OOV id.
class FeatureSpace {
 public:
  static constexpr std::size_t kItemBuckets = 16;

  FeatureSpace() = default;
  static FeatureSpace build(const Dataset& dataset, GroupThresholds thresholds = {});

  FeatureVector featurize(const InteractionRecord& rec) const;
  UserGroup group_of(const std::string& user_id) const;  // OOV users -> low

  std::size_t dim() const { return dim_; }
  const GroupThresholds& thresholds() const { return thresholds_; }

  // Checkpoint support.
  std::string to_json() const;
  static FeatureSpace from_json(const std::string& payload);

 private:
  GroupThresholds thresholds_;
  std::vector<std::string> categories_;             // sorted vocab
  std::vector<std::string> attr_names_;             // sorted
  std::vector<std::vector<std::string>> attr_values_;  // sorted per name
  std::map<std::string, UserGroup> user_groups_;
  std::size_t dim_ = 0;

  void finalize();

  friend bool operator==(const FeatureSpace&, const FeatureSpace&);
};

bool operator==(const FeatureSpace& a, const FeatureSpace& b);

}  // namespace watchsim
