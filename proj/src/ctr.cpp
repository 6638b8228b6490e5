#include "watchsim/ctr.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "watchsim/errors.hpp"
#include "watchsim/rng.hpp"

namespace watchsim {

using nlohmann::json;

namespace {

constexpr const char* kSchemaTag = "ctr-model/v1";

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

CtrModel::CtrModel(FeatureSpace space, const CtrConfig& config)
    : space_(std::move(space)),
      feature_dim_(space_.dim()),
      d_(config.d),
      hidden_(config.hidden_dim) {
  if (d_ == 0 || hidden_ == 0) {
    throw ValidationError("ctr config: d and hidden_dim must be positive");
  }
  params_.assign(param_count(), 0.0);
  RngStream rng(mix_seed(config.seed, 0xC7A11ULL));
  const double embed_sd = 0.1;
  for (std::size_t i = 0; i < feature_dim_ * d_; ++i) {
    params_[off_embed() + i] = rng.next_gaussian(0.0, embed_sd);
  }
  const double hidden_sd = 1.0 / std::sqrt(static_cast<double>(d_));
  for (std::size_t i = 0; i < hidden_ * d_; ++i) {
    params_[off_hidden_w() + i] = rng.next_gaussian(0.0, hidden_sd);
  }
  const double out_sd = 1.0 / std::sqrt(static_cast<double>(hidden_));
  for (std::size_t i = 0; i < hidden_; ++i) {
    params_[off_out_w() + i] = rng.next_gaussian(0.0, out_sd);
  }
}

double CtrModel::logit(const FeatureVector& fv) const {
  if (params_.empty()) throw ValidationError("ctr model is not initialized");
  for (std::size_t idx : fv.indices) {
    if (idx >= feature_dim_) {
      throw ValidationError("ctr predict: feature index out of range");
    }
  }
  double z = params_[0];
  std::vector<double> s(d_, 0.0), q(d_, 0.0);
  for (std::size_t n = 0; n < fv.indices.size(); ++n) {
    const std::size_t idx = fv.indices[n];
    const double x = fv.values[n];
    z += params_[off_linear() + idx] * x;
    const double* v = &params_[off_embed() + idx * d_];
    for (std::size_t k = 0; k < d_; ++k) {
      const double vx = v[k] * x;
      s[k] += vx;
      q[k] += vx * vx;
    }
  }
  // Bi-interaction pooling, then one hidden layer.
  std::vector<double> pooled(d_);
  for (std::size_t k = 0; k < d_; ++k) pooled[k] = 0.5 * (s[k] * s[k] - q[k]);

  double mlp = params_[off_out_b()];
  for (std::size_t h = 0; h < hidden_; ++h) {
    double pre = params_[off_hidden_b() + h];
    const double* wrow = &params_[off_hidden_w() + h * d_];
    for (std::size_t k = 0; k < d_; ++k) pre += wrow[k] * pooled[k];
    mlp += params_[off_out_w() + h] * std::tanh(pre);
  }
  return z + mlp;
}

double CtrModel::predict(const FeatureVector& fv) const {
  return sigmoid(logit(fv));
}

double CtrModel::loss_and_grad(const std::vector<FeatureVector>& batch,
                               const std::vector<int>& labels,
                               std::vector<double>* grad) const {
  if (batch.size() != labels.size() || batch.empty()) {
    throw ValidationError("ctr loss: batch/label size mismatch");
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<double> s(d_), q(d_), pooled(d_), hpre(hidden_), hact(hidden_);
  for (std::size_t row = 0; row < batch.size(); ++row) {
    const FeatureVector& fv = batch[row];
    std::fill(s.begin(), s.end(), 0.0);
    std::fill(q.begin(), q.end(), 0.0);
    double z = params_[0];
    for (std::size_t n = 0; n < fv.indices.size(); ++n) {
      const std::size_t idx = fv.indices[n];
      const double x = fv.values[n];
      z += params_[off_linear() + idx] * x;
      const double* v = &params_[off_embed() + idx * d_];
      for (std::size_t k = 0; k < d_; ++k) {
        const double vx = v[k] * x;
        s[k] += vx;
        q[k] += vx * vx;
      }
    }
    for (std::size_t k = 0; k < d_; ++k) pooled[k] = 0.5 * (s[k] * s[k] - q[k]);
    double mlp = params_[off_out_b()];
    for (std::size_t h = 0; h < hidden_; ++h) {
      double pre = params_[off_hidden_b() + h];
      const double* wrow = &params_[off_hidden_w() + h * d_];
      for (std::size_t k = 0; k < d_; ++k) pre += wrow[k] * pooled[k];
      hpre[h] = pre;
      hact[h] = std::tanh(pre);
      mlp += params_[off_out_w() + h] * hact[h];
    }
    const double p = sigmoid(z + mlp);
    const int y = labels[row];
    const double eps = 1e-12;
    loss -= inv_n * (y * std::log(p + eps) + (1 - y) * std::log(1.0 - p + eps));

    if (grad == nullptr) continue;
    std::vector<double>& g = *grad;
    const double gz = inv_n * (p - static_cast<double>(y));
    g[0] += gz;
    // Output layer.
    g[off_out_b()] += gz;
    std::vector<double> dpooled(d_, 0.0);
    for (std::size_t h = 0; h < hidden_; ++h) {
      g[off_out_w() + h] += gz * hact[h];
      const double dpre = gz * params_[off_out_w() + h] * (1.0 - hact[h] * hact[h]);
      g[off_hidden_b() + h] += dpre;
      const double* wrow = &params_[off_hidden_w() + h * d_];
      double* gw = &g[off_hidden_w() + h * d_];
      for (std::size_t k = 0; k < d_; ++k) {
        gw[k] += dpre * pooled[k];
        dpooled[k] += dpre * wrow[k];
      }
    }
    // d pooled_k / d v_ik = x * (s_k - v_ik * x)
    for (std::size_t n = 0; n < fv.indices.size(); ++n) {
      const std::size_t idx = fv.indices[n];
      const double x = fv.values[n];
      g[off_linear() + idx] += gz * x;
      const double* v = &params_[off_embed() + idx * d_];
      double* gv = &g[off_embed() + idx * d_];
      for (std::size_t k = 0; k < d_; ++k) {
        gv[k] += dpooled[k] * x * (s[k] - v[k] * x);
      }
    }
  }
  if (!std::isfinite(loss)) {
    throw std::runtime_error("ctr training diverged: non-finite loss");
  }
  return loss;
}

CtrModel train_ctr(const Dataset& train, const CtrConfig& config,
                   GroupThresholds thresholds) {
  if (train.sessions.empty()) throw ValidationError("train_ctr: empty dataset");
  CtrModel model(FeatureSpace::build(train, thresholds), config);

  std::vector<FeatureVector> examples;
  std::vector<int> labels;
  for (const auto& session : train.sessions) {
    for (const auto& rec : session.records) {
      examples.push_back(model.space().featurize(rec));
      labels.push_back(rec.click);
    }
  }

  const std::size_t n = examples.size();
  const std::size_t batch =
      config.batch_size == 0 ? n : std::min(config.batch_size, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  // Adam with bias-corrected moments.
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::vector<double> m(model.params().size(), 0.0);
  std::vector<double> v(model.params().size(), 0.0);
  std::vector<double> grad(model.params().size());
  RngStream shuffle_rng(mix_seed(config.seed, 0x5A441ULL));
  std::size_t step = 0;
  double epoch_loss = 0.0;

  std::vector<FeatureVector> batch_fv;
  std::vector<int> batch_y;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.next_below(i + 1)]);
    }
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(start + batch, n);
      batch_fv.clear();
      batch_y.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_fv.push_back(examples[order[i]]);
        batch_y.push_back(labels[order[i]]);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = model.loss_and_grad(batch_fv, batch_y, &grad);
      epoch_loss += loss * static_cast<double>(end - start);

      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto& params = model.params();
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        params[i] -= config.learning_rate * (m[i] / bc1) /
                     (std::sqrt(v[i] / bc2) + adam_eps);
      }
    }
  }
  model.final_train_loss_ = epoch_loss / static_cast<double>(n);
  return model;
}

std::string CtrModel::to_json() const {
  json obj;
  obj["schema"] = kSchemaTag;
  obj["feature_dim"] = feature_dim_;
  obj["d"] = d_;
  obj["hidden_dim"] = hidden_;
  obj["final_train_loss"] = final_train_loss_;
  obj["params"] = params_;
  obj["feature_space"] = json::parse(space_.to_json());
  return obj.dump();
}

CtrModel CtrModel::from_json(const std::string& payload) {
  json obj = json::parse(payload, nullptr, false);
  if (obj.is_discarded()) throw ValidationError("ctr model: invalid JSON");
  if (!obj.contains("schema") || obj["schema"] != kSchemaTag) {
    throw ValidationError("ctr model: unsupported schema tag");
  }
  CtrModel model;
  try {
    model.feature_dim_ = obj.at("feature_dim").get<std::size_t>();
    model.d_ = obj.at("d").get<std::size_t>();
    model.hidden_ = obj.at("hidden_dim").get<std::size_t>();
    model.final_train_loss_ = obj.at("final_train_loss").get<double>();
    model.params_ = obj.at("params").get<std::vector<double>>();
    model.space_ = FeatureSpace::from_json(obj.at("feature_space").dump());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("ctr model: ") + e.what());
  }
  if (model.params_.size() != model.param_count() ||
      model.feature_dim_ != model.space_.dim()) {
    throw ValidationError("ctr model: inconsistent dimensions");
  }
  for (double p : model.params_) {
    if (!std::isfinite(p)) throw ValidationError("ctr model: non-finite parameter");
  }
  return model;
}

PreferenceScore preference_score(const CtrModel& model,
                                 const InteractionRecord& rec,
                                 std::optional<double> completion_cap) {
  PreferenceScore out;
  out.ctr_hat = model.predict(model.space().featurize(rec));
  out.completion = rec.completion_rate();
  if (completion_cap && out.completion > *completion_cap) {
    out.completion = *completion_cap;
  }
  out.score = out.ctr_hat + out.completion;
  return out;
}

std::vector<double> model_preference_targets(
    const CtrModel& model, const Dataset& dataset,
    std::optional<double> completion_cap) {
  std::vector<double> targets;
  targets.reserve(dataset.record_count());
  for (const auto& session : dataset.sessions) {
    for (const auto& rec : session.records) {
      targets.push_back(preference_score(model, rec, completion_cap).score);
    }
  }
  return targets;
}

}  // namespace watchsim
