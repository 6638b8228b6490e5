#include "watchsim/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "watchsim/errors.hpp"
#include "watchsim/rng.hpp"

namespace watchsim {

PredictionMode prediction_mode_from_string(const std::string& s) {
  if (s == "greedy") return PredictionMode::greedy;
  if (s == "sample") return PredictionMode::sample;
  throw ValidationError("unknown prediction mode: " + s);
}

std::vector<SimulatedSession> simulate_sessions(const Dataset& dataset,
                                                const BinnedPolicy& policy,
                                                const RerankSpec& spec,
                                                const SimulationConfig& cfg,
                                                const CtrFn* scores) {
  const auto groups = compute_user_groups(dataset, cfg.thresholds);
  std::vector<SimulatedSession> out;
  out.reserve(dataset.sessions.size());

  for (std::size_t si = 0; si < dataset.sessions.size(); ++si) {
    const Session& session = dataset.sessions[si];
    SimulatedSession sim;
    if (spec.method == RerankMethod::greedy_swap) {
      if (scores == nullptr) {
        throw ValidationError("simulate: greedy_swap requires item scores");
      }
      std::vector<double> item_scores;
      item_scores.reserve(session.records.size());
      for (const auto& rec : session.records) item_scores.push_back((*scores)(rec));
      sim.reranked = rerank(session, spec, &item_scores);
    } else {
      sim.reranked = rerank(session, spec);
    }

    const UserGroup group = groups.at(session.user_id);
    RngStream stream(mix_seed(cfg.seed, 0x51A7EULL, si));
    std::vector<double>& predicted = sim.predicted_c;
    predicted.reserve(sim.reranked.records.size());
    std::string prev_top;
    for (std::size_t j = 0; j < sim.reranked.records.size(); ++j) {
      const auto& rec = sim.reranked.records[j];
      PolicyContext ctx;
      ctx.user_group = group;
      ctx.stock = stock_after(predicted, cfg.sigma, cfg.stock_mode);
      ctx.category_match = !prev_top.empty() && rec.top_category() == prev_top;
      ctx.log_length = std::log10(1.0 + rec.video_length);
      ctx.history_len = j;

      const std::size_t bin = cfg.mode == PredictionMode::greedy
                                  ? argmax_bin(policy, ctx)
                                  : sample_consumption(policy, ctx, stream).bin;
      predicted.push_back(policy.bin_center(bin));
      prev_top = rec.top_category();
    }
    out.push_back(std::move(sim));
  }
  return out;
}

namespace {

MethodReport build_method_report(std::vector<SimulatedSession> sims,
                                 const RerankSpec& spec, const CtrFn& ctr,
                                 const SimulationConfig& cfg) {
  MethodReport report;
  report.spec = spec;
  report.sessions = std::move(sims);

  std::vector<double> targets, flat_c, flat_stock;
  std::vector<ConsumptionSeries> series;
  double c_sum = 0.0;
  std::size_t c_count = 0;
  for (const auto& sim : report.sessions) {
    auto s = make_series(sim.predicted_c, cfg.sigma, cfg.stock_mode);
    for (std::size_t j = 0; j < sim.reranked.records.size(); ++j) {
      const auto& rec = sim.reranked.records[j];
      const double simulated_watch = inverse_consumption(sim.predicted_c[j]);
      targets.push_back(ctr(rec) + simulated_watch / rec.video_length);
      flat_c.push_back(s.c[j]);
      flat_stock.push_back(s.stock[j]);
      c_sum += sim.predicted_c[j];
      ++c_count;
    }
    for (std::size_t p = 0; p < sim.reranked.records.size(); ++p) {
      report.exposure[sim.reranked.records[p].top_category()] +=
          position_weight(p);
    }
    series.push_back(std::move(s));
  }
  report.mean_predicted_c =
      c_count == 0 ? 0.0 : c_sum / static_cast<double>(c_count);
  report.params = fit_addiction(targets, flat_c, flat_stock, cfg.ridge_lambda);
  report.metrics = addiction_metrics(report.params);

  // Aggregate cumulative curve: mean (minutes, utility) at each video index
  // over the sessions still running at that index.
  std::size_t max_len = 0;
  for (const auto& s : series) max_len = std::max(max_len, s.c.size());
  std::vector<std::vector<CurvePoint>> curves;
  curves.reserve(series.size());
  for (const auto& s : series) curves.push_back(utility_curve(report.params, s));
  for (std::size_t k = 0; k < max_len; ++k) {
    CurvePoint mean_pt;
    std::size_t alive = 0;
    for (const auto& curve : curves) {
      if (k >= curve.size()) continue;
      mean_pt.cumulative_minutes += curve[k].cumulative_minutes;
      mean_pt.cumulative_utility += curve[k].cumulative_utility;
      ++alive;
    }
    if (alive == 0) break;
    mean_pt.cumulative_minutes /= static_cast<double>(alive);
    mean_pt.cumulative_utility /= static_cast<double>(alive);
    report.mean_curve.push_back(mean_pt);
  }
  return report;
}

}  // namespace

SimulationReport measure_addiction_shift(const Dataset& dataset,
                                         const BinnedPolicy& policy,
                                         const std::vector<RerankSpec>& specs,
                                         const CtrFn& ctr,
                                         const SimulationConfig& cfg) {
  if (specs.empty() || specs.front().method != RerankMethod::identity) {
    throw ValidationError(
        "measure_addiction_shift: specs must start with the identity baseline");
  }
  SimulationReport report;
  for (const auto& spec : specs) {
    auto sims = simulate_sessions(dataset, policy, spec, cfg, &ctr);
    report.methods.push_back(build_method_report(std::move(sims), spec, ctr, cfg));
  }
  return report;
}

}  // namespace watchsim
