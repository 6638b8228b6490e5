#include "watchsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "watchsim/errors.hpp"

namespace watchsim {

MetricUnit metric_unit_from_string(const std::string& s) {
  if (s == "consumption") return MetricUnit::consumption;
  if (s == "seconds") return MetricUnit::seconds;
  throw ValidationError("unknown metric unit: " + s);
}

const char* to_string(MetricUnit unit) {
  return unit == MetricUnit::consumption ? "consumption" : "seconds";
}

namespace {

void check_alignment(const std::vector<std::vector<double>>& pred,
                     const std::vector<std::vector<double>>& truth) {
  if (pred.size() != truth.size()) {
    throw ValidationError("metrics: session count mismatch");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != truth[i].size()) {
      throw ValidationError("metrics: video count mismatch in session " +
                            std::to_string(i));
    }
  }
}

std::pair<double, double> mae_rmse(const std::vector<double>& errors) {
  if (errors.empty()) return {0.0, 0.0};
  double abs_sum = 0.0, sq_sum = 0.0;
  for (double e : errors) {
    abs_sum += std::fabs(e);
    sq_sum += e * e;
  }
  const double n = static_cast<double>(errors.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

}  // namespace

std::pair<double, double> session_metrics(
    const std::vector<std::vector<double>>& pred,
    const std::vector<std::vector<double>>& truth) {
  check_alignment(pred, truth);
  std::vector<double> errors;
  errors.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::accumulate(pred[i].begin(), pred[i].end(), 0.0);
    const double t = std::accumulate(truth[i].begin(), truth[i].end(), 0.0);
    errors.push_back(p - t);
  }
  return mae_rmse(errors);
}

std::pair<double, double> video_metrics(
    const std::vector<std::vector<double>>& pred,
    const std::vector<std::vector<double>>& truth) {
  check_alignment(pred, truth);
  std::vector<double> errors;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < pred[i].size(); ++j) {
      errors.push_back(pred[i][j] - truth[i][j]);
    }
  }
  return mae_rmse(errors);
}

MetricsReport compute_metrics(const std::vector<std::vector<double>>& pred,
                              const std::vector<std::vector<double>>& truth,
                              MetricUnit unit) {
  auto maybe_invert = [unit](const std::vector<std::vector<double>>& in) {
    if (unit == MetricUnit::consumption) return in;
    std::vector<std::vector<double>> out = in;
    for (auto& session : out) {
      for (auto& v : session) v = inverse_consumption(v);
    }
    return out;
  };
  const auto p = maybe_invert(pred);
  const auto t = maybe_invert(truth);
  MetricsReport report;
  report.unit = unit;
  std::tie(report.session_mae, report.session_rmse) = session_metrics(p, t);
  std::tie(report.video_mae, report.video_rmse) = video_metrics(p, t);
  report.n_sessions = pred.size();
  for (const auto& session : pred) report.n_videos += session.size();
  return report;
}

std::vector<std::vector<double>> logged_consumption(const Dataset& dataset) {
  std::vector<std::vector<double>> out;
  out.reserve(dataset.sessions.size());
  for (const auto& session : dataset.sessions) {
    std::vector<double> c;
    c.reserve(session.records.size());
    for (const auto& rec : session.records) {
      c.push_back(consumption_transform(rec.watch_time));
    }
    out.push_back(std::move(c));
  }
  return out;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ValidationError("auc: score/label size mismatch");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Average ranks over ties, then the Mann-Whitney statistic.
  std::vector<double> ranks(scores.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg_rank;
    i = j + 1;
  }
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == 1) {
      positive_rank_sum += ranks[k];
      ++n_pos;
    }
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw ValidationError("auc: needs both positive and negative labels");
  }
  const double u = positive_rank_sum -
                   static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  if (p <= 0.0) return values.front();
  if (p >= 1.0) return values.back();
  const double h = p * (static_cast<double>(values.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values[lo];
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<AddictionParams> crossval_addiction(const Dataset& dataset,
                                                std::size_t k,
                                                std::uint64_t seed,
                                                const CtrFn& ctr,
                                                const FitOptions& options) {
  auto folds = split_folds(dataset, k, seed);
  std::vector<AddictionParams> out;
  out.reserve(folds.size());
  for (const auto& fold : folds) {
    auto data = build_regression_data(fold.train, ctr, options.sigma,
                                      options.stock_mode);
    out.push_back(fit_addiction(data.flat_targets, data.flat_c, data.flat_stock,
                                options.ridge_lambda));
  }
  return out;
}

CohortBreakdown cohort_breakdown(const Dataset& dataset,
                                 const std::string& grouping, const CtrFn& ctr,
                                 const AddictionParams& shared,
                                 const FitOptions& options,
                                 double addicted_threshold,
                                 GroupThresholds thresholds) {
  CohortBreakdown breakdown;
  breakdown.grouping = grouping;

  const auto users = dataset.user_ids();
  std::map<std::string, std::string> key_of;  // user -> group key
  if (grouping == "frequency") {
    const auto groups = compute_user_groups(dataset, thresholds);
    for (const auto& user : users) key_of[user] = to_string(groups.at(user));
  } else {
    bool attribute_seen = false;
    for (const auto& session : dataset.sessions) {
      for (const auto& rec : session.records) {
        auto it = rec.user_attrs.find(grouping);
        if (it != rec.user_attrs.end()) {
          key_of[rec.user_id] = it->second;
          attribute_seen = true;
        }
      }
    }
    if (!attribute_seen) {
      throw ValidationError("cohort_breakdown: unknown attribute " + grouping);
    }
  }

  std::map<std::string, std::vector<PersonalizedParams>> fits_by_key;
  for (const auto& user : users) {
    auto it = key_of.find(user);
    if (it == key_of.end()) {
      breakdown.warnings.push_back("user " + user + " lacks attribute " +
                                   grouping + "; omitted");
      continue;
    }
    fits_by_key[it->second].push_back(
        fit_personalized(dataset, user, ctr, shared, options));
  }

  for (const auto& [key, fits] : fits_by_key) {
    if (fits.empty()) {
      breakdown.warnings.push_back("group " + key + " is empty; omitted");
      continue;
    }
    CohortGroupStats stats;
    stats.key = key;
    stats.user_count = fits.size();
    std::size_t addicted = 0;
    for (const auto& fit : fits) {
      stats.mean_params.a += fit.params.a;
      stats.mean_params.b += fit.params.b;
      stats.mean_params.w += fit.params.w;
      stats.mean_params.residual_mse += fit.params.residual_mse;
      stats.mean_params.n_obs += fit.params.n_obs;
      if (fit.used_fallback) ++stats.fallback_count;
      if (fit.params.w > addicted_threshold) ++addicted;
    }
    const double n = static_cast<double>(fits.size());
    stats.mean_params.a /= n;
    stats.mean_params.b /= n;
    stats.mean_params.w /= n;
    stats.mean_params.residual_mse /= n;
    stats.mean_params.ridge_lambda = options.ridge_lambda;
    stats.addicted_share = static_cast<double>(addicted) / n;
    if (stats.mean_params.b != 0.0) {
      stats.metrics = addiction_metrics(stats.mean_params);
    }
    breakdown.groups.push_back(std::move(stats));
  }
  return breakdown;
}

}  // namespace watchsim
