#include "watchsim/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include "watchsim/errors.hpp"

namespace watchsim {

RerankMethod rerank_method_from_string(const std::string& s) {
  if (s == "identity") return RerankMethod::identity;
  if (s == "round_robin") return RerankMethod::round_robin;
  if (s == "maxmin_exposure") return RerankMethod::maxmin_exposure;
  if (s == "greedy_swap") return RerankMethod::greedy_swap;
  throw ValidationError("unknown rerank method: " + s);
}

const char* to_string(RerankMethod method) {
  switch (method) {
    case RerankMethod::identity: return "identity";
    case RerankMethod::round_robin: return "round_robin";
    case RerankMethod::maxmin_exposure: return "maxmin_exposure";
    default: return "greedy_swap";
  }
}

double position_weight(std::size_t position) {
  return 1.0 / std::log2(static_cast<double>(position) + 2.0);
}

namespace {

std::vector<std::size_t> round_robin_order(
    const std::vector<InteractionRecord>& records) {
  std::vector<std::string> category_order;
  std::map<std::string, std::deque<std::size_t>> queues;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& cat = records[i].top_category();
    auto [it, inserted] = queues.try_emplace(cat);
    if (inserted) category_order.push_back(cat);
    it->second.push_back(i);
  }
  std::vector<std::size_t> order;
  order.reserve(records.size());
  while (order.size() < records.size()) {
    for (const auto& cat : category_order) {
      auto& queue = queues[cat];
      if (queue.empty()) continue;
      order.push_back(queue.front());
      queue.pop_front();
    }
  }
  return order;
}

std::vector<std::size_t> maxmin_order(
    const std::vector<InteractionRecord>& records) {
  std::map<std::string, std::size_t> exposure;
  for (const auto& rec : records) exposure.try_emplace(rec.top_category(), 0);
  std::vector<bool> used(records.size(), false);
  std::vector<std::size_t> order;
  order.reserve(records.size());
  while (order.size() < records.size()) {
    // Least-exposed category that still has items; ties resolved by taking
    // the earliest remaining item among tied categories.
    std::size_t best = records.size();
    std::size_t best_exposure = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (used[i]) continue;
      const std::size_t e = exposure[records[i].top_category()];
      if (best == records.size() || e < best_exposure) {
        best = i;
        best_exposure = e;
      }
    }
    used[best] = true;
    ++exposure[records[best].top_category()];
    order.push_back(best);
  }
  return order;
}

double gini_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  if (total <= 0.0) return 0.0;
  double abs_diff_sum = 0.0;
  for (double a : values) {
    for (double b : values) abs_diff_sum += std::fabs(a - b);
  }
  return abs_diff_sum /
         (2.0 * static_cast<double>(values.size()) * total);
}

double weighted_gini(const std::vector<InteractionRecord>& records) {
  std::map<std::string, double> exposure;
  for (std::size_t p = 0; p < records.size(); ++p) {
    exposure[records[p].top_category()] += position_weight(p);
  }
  std::vector<double> values;
  values.reserve(exposure.size());
  for (const auto& [cat, e] : exposure) values.push_back(e);
  return gini_of(values);
}

}  // namespace

double exposure_gini(const Session& session) {
  return weighted_gini(session.records);
}

double max_prefix_exposure_spread(const Session& session) {
  std::map<std::string, std::size_t> counts;
  for (const auto& rec : session.records) counts.try_emplace(rec.top_category(), 0);
  double worst = 0.0;
  for (const auto& rec : session.records) {
    ++counts[rec.top_category()];
    std::size_t lo = counts.begin()->second, hi = 0;
    for (const auto& [cat, n] : counts) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    worst = std::max(worst, static_cast<double>(hi - lo));
  }
  return worst;
}

Session rerank(const Session& session, const RerankSpec& spec,
               const std::vector<double>* scores) {
  if (spec.score_loss_budget < 0.0) {
    throw ValidationError("rerank: score_loss_budget must be >= 0");
  }
  const std::size_t n = session.records.size();
  const std::size_t window = spec.top_k ? std::min(*spec.top_k, n) : n;

  if (spec.method == RerankMethod::identity || window < 2) return session;

  std::vector<InteractionRecord> head(session.records.begin(),
                                      session.records.begin() + window);

  if (spec.method == RerankMethod::round_robin ||
      spec.method == RerankMethod::maxmin_exposure) {
    const auto order = spec.method == RerankMethod::round_robin
                           ? round_robin_order(head)
                           : maxmin_order(head);
    Session out;
    out.user_id = session.user_id;
    out.records.reserve(n);
    for (std::size_t idx : order) out.records.push_back(head[idx]);
    out.records.insert(out.records.end(), session.records.begin() + window,
                       session.records.end());
    return out;
  }

  // greedy_swap
  if (scores == nullptr) {
    throw ValidationError("rerank: greedy_swap requires per-item scores");
  }
  if (scores->size() != n) {
    throw ValidationError("rerank: scores length mismatch");
  }
  std::vector<std::size_t> order(window);
  for (std::size_t i = 0; i < window; ++i) order[i] = i;

  auto order_value = [&](const std::vector<std::size_t>& o) {
    double v = 0.0;
    for (std::size_t p = 0; p < o.size(); ++p) {
      v += position_weight(p) * (*scores)[o[p]];
    }
    return v;
  };
  auto order_gini = [&](const std::vector<std::size_t>& o) {
    std::vector<InteractionRecord> permuted;
    permuted.reserve(o.size());
    for (std::size_t idx : o) permuted.push_back(head[idx]);
    return weighted_gini(permuted);
  };

  const double base_value = order_value(order);
  double current_gini = order_gini(order);
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t p = 0; p + 1 < window; ++p) {
      if (head[order[p]].top_category() == head[order[p + 1]].top_category()) {
        continue;
      }
      std::swap(order[p], order[p + 1]);
      const double gini = order_gini(order);
      const double loss = base_value - order_value(order);
      if (gini < current_gini - 1e-12 && loss <= spec.score_loss_budget) {
        current_gini = gini;
        improved = true;
      } else {
        std::swap(order[p], order[p + 1]);  // revert
      }
    }
  }

  Session out;
  out.user_id = session.user_id;
  out.records.reserve(n);
  for (std::size_t idx : order) out.records.push_back(head[idx]);
  out.records.insert(out.records.end(), session.records.begin() + window,
                     session.records.end());
  return out;
}

}  // namespace watchsim
