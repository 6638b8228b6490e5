#include "watchsim/policy.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "watchsim/errors.hpp"

namespace watchsim {

using nlohmann::json;

namespace {
constexpr const char* kSchemaTag = "bin-policy/v1";
}

std::array<double, kPolicyFeatureCount> policy_features(const PolicyContext& ctx) {
  // All features kept O(1) so no single weight row dominates the updates.
  std::array<double, kPolicyFeatureCount> f{};
  f[0] = 1.0;
  f[1] = ctx.stock / 4.0;
  f[2] = ctx.category_match ? 1.0 : 0.0;
  f[3] = ctx.log_length / 4.0;
  f[4] = static_cast<double>(std::min<std::size_t>(ctx.history_len, 32)) / 32.0;
  f[5] = ctx.user_group == UserGroup::low ? 1.0 : 0.0;
  f[6] = ctx.user_group == UserGroup::medium ? 1.0 : 0.0;
  f[7] = ctx.user_group == UserGroup::high ? 1.0 : 0.0;
  return f;
}

BinnedPolicy::BinnedPolicy(std::size_t bins, double c_max, double temperature)
    : bins_(bins), c_max_(c_max), temperature_(temperature) {
  if (bins_ < 2) throw ValidationError("policy: need at least 2 bins");
  if (!(c_max_ > 0.0)) throw ValidationError("policy: c_max must be > 0");
  if (!(temperature_ > 0.0)) throw ValidationError("policy: temperature must be > 0");
  weights_.assign(bins_ * kPolicyFeatureCount, 0.0);
}

double BinnedPolicy::bin_center(std::size_t bin) const {
  return (static_cast<double>(bin) + 0.5) * c_max_ / static_cast<double>(bins_);
}

std::vector<double> BinnedPolicy::log_probs(const PolicyContext& ctx) const {
  if (ctx.stock < 0.0) throw ValidationError("policy: stock must be >= 0");
  const auto f = policy_features(ctx);
  std::vector<double> logits(bins_);
  for (std::size_t b = 0; b < bins_; ++b) {
    double z = 0.0;
    const double* row = &weights_[b * kPolicyFeatureCount];
    for (std::size_t k = 0; k < kPolicyFeatureCount; ++k) z += row[k] * f[k];
    logits[b] = z / temperature_;
    if (!std::isfinite(logits[b])) {
      throw std::runtime_error("policy: non-finite logit");
    }
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max_logit);
  const double log_z = max_logit + std::log(sum);
  for (double& z : logits) z -= log_z;
  return logits;
}

std::vector<double> BinnedPolicy::probs(const PolicyContext& ctx) const {
  auto lp = log_probs(ctx);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

std::string BinnedPolicy::to_json() const {
  json obj;
  obj["schema"] = kSchemaTag;
  obj["bins"] = bins_;
  obj["c_max"] = c_max_;
  obj["temperature"] = temperature_;
  obj["features"] = kPolicyFeatureCount;
  obj["weights"] = weights_;
  return obj.dump();
}

BinnedPolicy BinnedPolicy::from_json(const std::string& payload) {
  json obj = json::parse(payload, nullptr, false);
  if (obj.is_discarded()) throw ValidationError("policy: invalid JSON");
  if (!obj.contains("schema") || obj["schema"] != kSchemaTag) {
    throw ValidationError("policy: unsupported schema tag");
  }
  try {
    BinnedPolicy policy(obj.at("bins").get<std::size_t>(),
                        obj.at("c_max").get<double>(),
                        obj.at("temperature").get<double>());
    if (obj.at("features").get<std::size_t>() != kPolicyFeatureCount) {
      throw ValidationError("policy: unexpected feature count");
    }
    auto weights = obj.at("weights").get<std::vector<double>>();
    if (weights.size() != policy.weights().size()) {
      throw ValidationError("policy: weight size mismatch");
    }
    policy.weights() = std::move(weights);
    return policy;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("policy: ") + e.what());
  }
}

SampledConsumption sample_consumption(const BinnedPolicy& policy,
                                      const PolicyContext& ctx,
                                      RngStream& stream) {
  const auto probs = policy.probs(ctx);
  const double u = stream.next_double();
  double acc = 0.0;
  std::size_t bin = probs.size() - 1;
  for (std::size_t b = 0; b < probs.size(); ++b) {
    acc += probs[b];
    if (u < acc) {
      bin = b;
      break;
    }
  }
  return {bin, policy.bin_center(bin), std::log(probs[bin])};
}

std::size_t argmax_bin(const BinnedPolicy& policy, const PolicyContext& ctx) {
  const auto probs = policy.probs(ctx);
  return static_cast<std::size_t>(
      std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace watchsim
