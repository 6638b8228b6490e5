#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "watchsim/rng.hpp"
#include "watchsim/types.hpp"

namespace watchsim {

// Session state the simulator conditions on at one step.
struct PolicyContext {
  UserGroup user_group = UserGroup::low;
  double stock = 0.0;          // current addiction capital T
  bool category_match = false; // current top category equals the previous one
  double log_length = 0.0;     // log10(1 + video_length)
  std::size_t history_len = 0; // videos already watched this session
};

constexpr std::size_t kPolicyFeatureCount = 8;
std::array<double, kPolicyFeatureCount> policy_features(const PolicyContext& ctx);

// Softmax policy over B consumption bins on [0, c_max]; logits are linear in
// the context features, one weight row per bin.
class BinnedPolicy {
 public:
  explicit BinnedPolicy(std::size_t bins = 32, double c_max = 4.0,
                        double temperature = 1.0);

  std::size_t bins() const { return bins_; }
  double c_max() const { return c_max_; }
  double temperature() const { return temperature_; }
  double bin_center(std::size_t bin) const;

  std::vector<double>& weights() { return weights_; }         // bins x features
  const std::vector<double>& weights() const { return weights_; }

  std::vector<double> probs(const PolicyContext& ctx) const;
  std::vector<double> log_probs(const PolicyContext& ctx) const;

  std::string to_json() const;
  static BinnedPolicy from_json(const std::string& payload);

  bool operator==(const BinnedPolicy&) const = default;

 private:
  std::size_t bins_;
  double c_max_;
  double temperature_;
  std::vector<double> weights_;
};

// Frozen parameter copy serving as the sampling policy or the KL anchor.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(const BinnedPolicy& policy) : policy_(policy) {}
  const BinnedPolicy& get() const { return policy_; }

 private:
  const BinnedPolicy policy_;
};

struct SampledConsumption {
  std::size_t bin = 0;
  double c = 0.0;       // bin center
  double log_prob = 0.0;
};

SampledConsumption sample_consumption(const BinnedPolicy& policy,
                                      const PolicyContext& ctx,
                                      RngStream& stream);

std::size_t argmax_bin(const BinnedPolicy& policy, const PolicyContext& ctx);

}  // namespace watchsim
