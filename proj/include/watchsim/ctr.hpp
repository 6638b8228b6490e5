#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "watchsim/features.hpp"
#include "watchsim/types.hpp"

namespace watchsim {

struct CtrConfig {
  std::size_t d = 8;            // embedding dimension
  std::size_t hidden_dim = 16;  // single nonlinear hidden layer
  double learning_rate = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;  // 0 = full batch
  std::uint64_t seed = 0;
};

// Factorized interaction model: logistic(m0 + sum m_i x_i + MLP(pooled)),
// where pooled is the bi-interaction term 0.5 * ((sum v_i x_i)^2 - sum (v_i x_i)^2)
// over the active embeddings and the MLP is one tanh hidden layer.
class CtrModel {
 public:
  CtrModel() = default;
  CtrModel(FeatureSpace space, const CtrConfig& config);

  double predict(const FeatureVector& fv) const;  // probability in (0, 1)
  double logit(const FeatureVector& fv) const;

  const FeatureSpace& space() const { return space_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t embedding_dim() const { return d_; }
  std::size_t hidden_dim() const { return hidden_; }
  double final_train_loss() const { return final_train_loss_; }

  // Flat parameter access (bias, linear, embeddings, hidden, output) used by
  // the trainer and the finite-difference checks.
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // Mean binary cross-entropy over the batch; accumulates d(loss)/d(params)
  // into grad (same layout as params) when grad != nullptr.
  double loss_and_grad(const std::vector<FeatureVector>& batch,
                       const std::vector<int>& labels,
                       std::vector<double>* grad) const;

  std::string to_json() const;
  static CtrModel from_json(const std::string& payload);

 private:
  FeatureSpace space_;
  std::size_t feature_dim_ = 0;
  std::size_t d_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> params_;
  double final_train_loss_ = 0.0;

  // Layout offsets into params_.
  std::size_t off_linear() const { return 1; }
  std::size_t off_embed() const { return 1 + feature_dim_; }
  std::size_t off_hidden_w() const { return off_embed() + feature_dim_ * d_; }
  std::size_t off_hidden_b() const { return off_hidden_w() + hidden_ * d_; }
  std::size_t off_out_w() const { return off_hidden_b() + hidden_; }
  std::size_t off_out_b() const { return off_out_w() + hidden_; }
  std::size_t param_count() const { return off_out_b() + 1; }

  friend CtrModel train_ctr(const Dataset&, const CtrConfig&, GroupThresholds);
};

// Minimizes mean cross-entropy with Adam; deterministic per config.seed.
// Throws on non-finite loss.
CtrModel train_ctr(const Dataset& train, const CtrConfig& config,
                   GroupThresholds thresholds = {});

struct PreferenceScore {
  double ctr_hat = 0.0;     // in (0, 1)
  double completion = 0.0;  // watch_time / video_length, >= 0
  double score = 0.0;       // ctr_hat + completion
};

PreferenceScore preference_score(const CtrModel& model,
                                 const InteractionRecord& rec,
                                 std::optional<double> completion_cap = {});

// Regression targets (ctr + completion) aligned with dataset.flatten().
std::vector<double> model_preference_targets(
    const CtrModel& model, const Dataset& dataset,
    std::optional<double> completion_cap = {});

}  // namespace watchsim
