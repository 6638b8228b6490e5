// watchsim: measure addiction patterns in short-video watch logs, train a
// watch-time simulator against addiction-derived rewards, and evaluate
// diversity-aware re-ranking interventions on the simulated sessions.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "watchsim/addiction.hpp"
#include "watchsim/corpus.hpp"
#include "watchsim/ctr.hpp"
#include "watchsim/errors.hpp"
#include "watchsim/grpo.hpp"
#include "watchsim/io.hpp"
#include "watchsim/metrics.hpp"
#include "watchsim/policy.hpp"
#include "watchsim/rerank.hpp"
#include "watchsim/reward.hpp"
#include "watchsim/simulate.hpp"
#include "watchsim/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace watchsim;

namespace {

// ---------------------------------------------------------------------------
// shared option bundles

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
};

struct LoadOptions {
  std::string input;
  std::string format;  // "", "csv", "jsonl"
  double session_gap = kDefaultSessionGap;
  std::size_t min_interactions = 5;
};

struct CtrSourceOptions {
  std::string ctr_model_path;
  std::optional<std::uint64_t> planted_seed;
};

void add_load_options(CLI::App* cmd, LoadOptions& opts) {
  cmd->add_option("--input", opts.input, "interaction log (csv or jsonl)")
      ->required();
  cmd->add_option("--format", opts.format, "csv|jsonl (default: by extension)");
  cmd->add_option("--session-gap", opts.session_gap,
                  "session split threshold in seconds");
  cmd->add_option("--min-interactions", opts.min_interactions,
                  "drop users with fewer records (0 disables)");
}

void add_ctr_source_options(CLI::App* cmd, CtrSourceOptions& opts) {
  cmd->add_option("--ctr-model", opts.ctr_model_path,
                  "trained ctr checkpoint used for preference targets");
  cmd->add_option("--planted-seed", opts.planted_seed,
                  "reconstruct the synthetic click model from this seed");
}

Dataset load_dataset(const LoadOptions& opts) {
  const LogFormat format = opts.format.empty()
                               ? format_from_path(opts.input)
                               : format_from_string(opts.format);
  auto records = load_interactions(opts.input, format);
  if (opts.min_interactions > 0) {
    records = filter_min_interactions(std::move(records), opts.min_interactions);
  }
  return segment_sessions(records, opts.session_gap);
}

// Holds whichever ctr backend is selected alive inside the returned closure.
CtrFn make_ctr_fn(const CtrSourceOptions& opts, const Dataset& dataset) {
  if (!opts.ctr_model_path.empty()) {
    auto model = std::make_shared<CtrModel>(
        CtrModel::from_json(read_file(opts.ctr_model_path)));
    return [model](const InteractionRecord& rec) {
      return model->predict(model->space().featurize(rec));
    };
  }
  if (opts.planted_seed) {
    auto plant = std::make_shared<PlantedClickModel>(*opts.planted_seed);
    auto groups = std::make_shared<std::map<std::string, UserGroup>>(
        compute_user_groups(dataset, {}));
    return [plant, groups](const InteractionRecord& rec) {
      auto it = groups->find(rec.user_id);
      const UserGroup g = it == groups->end() ? UserGroup::low : it->second;
      return plant->ctr(rec, g);
    };
  }
  throw ValidationError("pass --ctr-model or --planted-seed");
}

// ---------------------------------------------------------------------------
// serialization helpers

void write_text(const fs::path& path, const std::string& content) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  write_file(path.string(), content);
}

void write_json_file(const fs::path& path, const json& obj) {
  write_text(path, obj.dump(2) + "\n");
}

json params_to_json(const AddictionParams& params, double sigma,
                    StockMode mode) {
  json obj;
  obj["a"] = params.a;
  obj["b"] = params.b;
  obj["w"] = params.w;
  obj["residual_mse"] = params.residual_mse;
  obj["n_obs"] = params.n_obs;
  obj["ridge_lambda"] = params.ridge_lambda;
  obj["sigma"] = sigma;
  obj["stock_mode"] = to_string(mode);
  return obj;
}

AddictionParams params_from_json_file(const std::string& path, double* sigma,
                                      StockMode* mode) {
  json obj = json::parse(read_file(path), nullptr, false);
  if (obj.is_discarded()) throw ValidationError("bad params file: " + path);
  AddictionParams params;
  try {
    params.a = obj.at("a").get<double>();
    params.b = obj.at("b").get<double>();
    params.w = obj.at("w").get<double>();
    params.residual_mse = obj.value("residual_mse", 0.0);
    params.n_obs = obj.value("n_obs", std::size_t{0});
    params.ridge_lambda = obj.value("ridge_lambda", 0.0);
    if (sigma) *sigma = obj.value("sigma", 0.9);
    if (mode && obj.contains("stock_mode")) {
      *mode = stock_mode_from_string(obj["stock_mode"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad params file: ") + e.what());
  }
  return params;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "cumulative_minutes,cumulative_utility\n";
  for (const auto& pt : curve) {
    out << format_double(pt.cumulative_minutes) << ','
        << format_double(pt.cumulative_utility) << '\n';
  }
  return out.str();
}

// Accepts a JSON object {"flag": value, ...} as --config in addition to the
// default TOML/INI reader.
class JsonOrTomlConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::stringstream buffer;
    buffer << input.rdbuf();
    const std::string text = buffer.str();
    json obj = json::parse(text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      std::istringstream again(text);
      return CLI::ConfigTOML::from_config(again);
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : obj.items()) {
      CLI::ConfigItem item;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) {
          item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
      } else {
        item.inputs.push_back(value.is_string() ? value.get<std::string>()
                                                : value.dump());
      }
      items.push_back(std::move(item));
    }
    return items;
  }
};

// ---------------------------------------------------------------------------
// subcommands

struct SynthCommand {
  std::vector<std::string> cohorts;
  double noise_sd = 0.05;
  double sigma = 0.9;
  double c_max = 4.0;
  std::string out;

  CohortSpec parse_cohort(const std::string& text) const {
    // name:a,b,w,coupling,users,sessions,mean_len
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
      throw ValidationError(
          "cohort spec needs 'name:a,b,w,coupling,users,sessions,mean_len', "
          "got: " + text);
    }
    CohortSpec cohort;
    cohort.name = text.substr(0, colon);
    std::vector<double> values;
    std::stringstream ss(text.substr(colon + 1));
    std::string piece;
    while (std::getline(ss, piece, ',')) {
      try {
        values.push_back(std::stod(piece));
      } catch (const std::exception&) {
        throw ValidationError("bad cohort number: " + piece);
      }
    }
    if (values.size() != 7) {
      throw ValidationError("cohort spec needs 7 numbers, got " +
                            std::to_string(values.size()));
    }
    cohort.a = values[0];
    cohort.b = values[1];
    cohort.w = values[2];
    cohort.category_coupling = values[3];
    cohort.user_count = static_cast<std::size_t>(values[4]);
    cohort.sessions_per_user = static_cast<std::size_t>(values[5]);
    cohort.mean_session_length = values[6];
    return cohort;
  }

  int run(const GlobalOptions& global) const {
    SyntheticSpec spec;
    for (const auto& text : cohorts) spec.cohorts.push_back(parse_cohort(text));
    spec.noise_sd = noise_sd;
    spec.seed = global.seed;
    spec.sigma = sigma;
    spec.c_max = c_max;
    auto dataset = generate_synthetic(spec);

    const std::string path =
        out.empty() ? (fs::path(global.out_dir) / "synthetic.csv").string() : out;
    write_text(path, "");  // ensures the directory exists
    save_interactions(path, format_from_path(path), dataset.flatten());
    std::cout << "wrote " << dataset.record_count() << " records ("
              << dataset.sessions.size() << " sessions, "
              << dataset.user_ids().size() << " users) to " << path << "\n";
    return 0;
  }
};

int run_ingest(const GlobalOptions& global, const LoadOptions& load) {
  const LogFormat format = load.format.empty()
                               ? format_from_path(load.input)
                               : format_from_string(load.format);
  auto records = load_interactions(load.input, format);
  const std::size_t raw = records.size();
  if (load.min_interactions > 0) {
    records = filter_min_interactions(std::move(records), load.min_interactions);
  }
  auto dataset = segment_sessions(records, load.session_gap);

  std::vector<double> lengths;
  for (const auto& s : dataset.sessions) {
    lengths.push_back(static_cast<double>(s.records.size()));
  }
  json summary;
  summary["records_in_file"] = raw;
  summary["records_kept"] = records.size();
  summary["users"] = dataset.user_ids().size();
  summary["sessions"] = dataset.sessions.size();
  summary["session_gap"] = load.session_gap;
  summary["min_interactions"] = load.min_interactions;
  if (!lengths.empty()) {
    summary["session_length_median"] = quantile(lengths, 0.5);
    summary["session_length_p90"] = quantile(lengths, 0.9);
  }
  write_json_file(fs::path(global.out_dir) / "ingest_summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

struct FitCtrCommand {
  CtrConfig config;
  std::string out;

  int run(const GlobalOptions& global, const LoadOptions& load) const {
    auto dataset = load_dataset(load);
    CtrConfig cfg = config;
    cfg.seed = global.seed;
    auto model = train_ctr(dataset, cfg);
    const std::string path =
        out.empty() ? (fs::path(global.out_dir) / "ctr_model.json").string() : out;
    write_text(path, model.to_json() + "\n");
    std::cout << "final train loss " << model.final_train_loss() << ", wrote "
              << path << "\n";
    return 0;
  }
};

struct FitAddictionCommand {
  double sigma = 0.9;
  std::string stock_mode = "recurrence";
  double ridge = 1e-8;
  std::string out;

  int run(const GlobalOptions& global, const LoadOptions& load,
          const CtrSourceOptions& ctr_source) const {
    auto dataset = load_dataset(load);
    auto ctr = make_ctr_fn(ctr_source, dataset);
    const StockMode mode = stock_mode_from_string(stock_mode);
    auto data = build_regression_data(dataset, ctr, sigma, mode);
    auto params =
        fit_addiction(data.flat_targets, data.flat_c, data.flat_stock, ridge);
    const std::string path =
        out.empty() ? (fs::path(global.out_dir) / "addiction_params.json").string()
                    : out;
    write_json_file(path, params_to_json(params, sigma, mode));
    std::cout << "a=" << params.a << " b=" << params.b << " w=" << params.w
              << " (n=" << params.n_obs << "), wrote " << path << "\n";
    return 0;
  }
};

struct CurvesCommand {
  std::string params_path;
  std::size_t limit = 16;

  int run(const GlobalOptions& global, const LoadOptions& load) const {
    auto dataset = load_dataset(load);
    double sigma = 0.9;
    StockMode mode = StockMode::recurrence;
    auto params = params_from_json_file(params_path, &sigma, &mode);

    const fs::path dir = fs::path(global.out_dir) / "curves";
    std::size_t written = 0;
    std::vector<std::vector<CurvePoint>> curves;
    std::map<std::string, std::size_t> session_index;
    for (const auto& session : dataset.sessions) {
      std::vector<double> c;
      for (const auto& rec : session.records) {
        c.push_back(consumption_transform(rec.watch_time));
      }
      auto curve = utility_curve(params, make_series(c, sigma, mode));
      const std::size_t k = session_index[session.user_id]++;
      if (written < limit) {
        write_text(dir / ("curve_" + session.user_id + "_" +
                          std::to_string(k) + ".csv"),
                   curve_csv(curve));
        ++written;
      }
      curves.push_back(std::move(curve));
    }
    // Aggregate: mean coordinates over the sessions still running at each
    // video index.
    std::size_t max_len = 0;
    for (const auto& c : curves) max_len = std::max(max_len, c.size());
    std::vector<CurvePoint> mean_curve;
    for (std::size_t k = 0; k < max_len; ++k) {
      CurvePoint pt;
      std::size_t alive = 0;
      for (const auto& c : curves) {
        if (k >= c.size()) continue;
        pt.cumulative_minutes += c[k].cumulative_minutes;
        pt.cumulative_utility += c[k].cumulative_utility;
        ++alive;
      }
      if (alive == 0) break;
      pt.cumulative_minutes /= static_cast<double>(alive);
      pt.cumulative_utility /= static_cast<double>(alive);
      mean_curve.push_back(pt);
    }
    write_text(dir / "curve_mean.csv", curve_csv(mean_curve));
    std::cout << "wrote " << written << " session curves + mean curve to "
              << dir.string() << "\n";
    return 0;
  }
};

struct RewardsCommand {
  std::string params_path;
  double phi = 1.0;
  double eta = 0.9;
  std::string stage = "both";  // shared|personalized|both
  std::size_t min_obs = 9;
  double ridge = 1e-8;

  int run(const GlobalOptions& global, const LoadOptions& load,
          const CtrSourceOptions& ctr_source) const {
    if (stage != "shared" && stage != "personalized" && stage != "both") {
      throw ValidationError("--stage must be shared, personalized, or both");
    }
    auto dataset = load_dataset(load);
    double sigma = 0.9;
    StockMode mode = StockMode::recurrence;
    auto shared = params_from_json_file(params_path, &sigma, &mode);

    std::map<std::string, PersonalizedParams> personalized;
    if (stage != "shared") {
      auto ctr = make_ctr_fn(ctr_source, dataset);
      FitOptions options{sigma, mode, ridge, min_obs};
      personalized = fit_all_personalized(dataset, ctr, shared, options);
    }

    std::ostringstream out;
    std::map<std::string, std::size_t> session_index;
    for (const auto& session : dataset.sessions) {
      std::vector<double> c;
      for (const auto& rec : session.records) {
        c.push_back(consumption_transform(rec.watch_time));
      }
      auto series = make_series(c, sigma, mode);
      const std::size_t index = session_index[session.user_id]++;
      auto emit = [&](const char* stage_name, const AddictionParams& params) {
        const double total = session_reward(params, series, phi);
        json row;
        row["user_id"] = session.user_id;
        row["session_index"] = index;
        row["stage"] = stage_name;
        row["session_total"] = total;
        row["per_video"] = allocate_rewards(total, series.c.size(), eta);
        out << row.dump() << '\n';
      };
      if (stage == "shared" || stage == "both") emit("shared", shared);
      if (stage == "personalized" || stage == "both") {
        emit("personalized", personalized.at(session.user_id).params);
      }
    }
    const fs::path path = fs::path(global.out_dir) / "rewards.jsonl";
    write_text(path, out.str());
    std::cout << "wrote " << path.string() << "\n";
    return 0;
  }
};

struct TrainCommand {
  std::size_t iters1 = 150;
  std::size_t iters2 = 150;
  double lr = 0.05;
  std::size_t group_size = 8;
  double epsilon = 0.3;
  double beta = 0.9;
  double phi = 1.0;
  double eta = 0.9;
  double sigma = 0.9;
  std::string stock_mode = "recurrence";
  bool no_stage1 = false;
  bool no_stage2 = false;
  bool sparse_reward = false;
  std::size_t bins = 32;
  double c_max = 4.0;
  std::size_t sessions_per_iter = 0;
  std::size_t min_obs = 9;
  double ridge = 1e-8;
  std::string log_file;

  int run(const GlobalOptions& global, const LoadOptions& load,
          const CtrSourceOptions& ctr_source) const {
    auto dataset = load_dataset(load);
    auto ctr = make_ctr_fn(ctr_source, dataset);
    const StockMode mode = stock_mode_from_string(stock_mode);

    auto data = build_regression_data(dataset, ctr, sigma, mode);
    auto shared =
        fit_addiction(data.flat_targets, data.flat_c, data.flat_stock, ridge);

    FitOptions fit_options{sigma, mode, ridge, min_obs};
    auto personalized = fit_all_personalized(dataset, ctr, shared, fit_options);
    std::size_t fallbacks = 0;
    for (const auto& [user, fit] : personalized) {
      if (fit.used_fallback) ++fallbacks;
    }

    M2aConfig cfg;
    cfg.bins = bins;
    cfg.c_max = c_max;
    cfg.run_stage1 = !no_stage1;
    cfg.run_stage2 = !no_stage2;
    cfg.reward.sigma = sigma;
    cfg.reward.phi = phi;
    cfg.reward.eta = eta;
    cfg.reward.group_size = group_size;
    cfg.reward.sparse = sparse_reward;
    cfg.reward.stock_mode = mode;
    for (TrainConfig* stage_cfg : {&cfg.stage1, &cfg.stage2}) {
      stage_cfg->epsilon = epsilon;
      stage_cfg->beta = beta;
      stage_cfg->group_size = group_size;
      stage_cfg->learning_rate = lr;
      stage_cfg->sessions_per_iter = sessions_per_iter;
    }
    cfg.stage1.iterations = iters1;
    cfg.stage2.iterations = iters2;
    cfg.stage1.seed = mix_seed(global.seed, 1);
    cfg.stage2.seed = mix_seed(global.seed, 2);

    const auto groups = compute_user_groups(dataset, {});
    auto result = train_m2a(dataset, cfg, shared, personalized, groups);

    write_text(fs::path(global.out_dir) / "policy.json",
               result.policy.to_json() + "\n");

    json summary;
    summary["stage1_iterations"] = cfg.run_stage1 ? iters1 : 0;
    summary["stage2_iterations"] = cfg.run_stage2 ? iters2 : 0;
    summary["sparse_reward"] = sparse_reward;
    summary["group_size"] = group_size;
    summary["epsilon"] = epsilon;
    summary["beta"] = beta;
    summary["learning_rate"] = lr;
    summary["shared_params"] = params_to_json(shared, sigma, mode);
    summary["personalized_fallbacks"] = fallbacks;
    summary["users"] = personalized.size();
    if (!result.log.empty()) {
      const auto& last = result.log.back();
      summary["final_objective"] = last.objective;
      summary["final_mean_kl"] = last.mean_kl;
      summary["final_mean_reward"] = last.mean_reward;
    }
    write_json_file(fs::path(global.out_dir) / "train_summary.json", summary);

    // The per-iteration log carries wallclock timings, so it is written only
    // on request and is not part of the deterministic artifact set.
    if (!log_file.empty()) {
      std::ostringstream log_out;
      for (const auto& entry : result.log) {
        json row;
        row["iter"] = entry.iter;
        row["stage"] = to_string(entry.stage);
        row["objective"] = entry.objective;
        row["mean_kl"] = entry.mean_kl;
        row["mean_reward"] = entry.mean_reward;
        row["wallclock_ms"] = entry.wallclock_ms;
        log_out << row.dump() << '\n';
      }
      write_text(log_file, log_out.str());
    }
    std::cout << "trained policy over " << result.log.size()
              << " iterations, wrote " << global.out_dir << "/policy.json\n";
    return 0;
  }
};

struct SimulateCommand {
  std::string policy_path;
  std::string methods = "identity,round_robin,maxmin_exposure,greedy_swap";
  std::string mode = "greedy";
  double budget = 0.5;
  std::optional<std::size_t> top_k;
  double sigma = 0.9;
  std::string stock_mode = "recurrence";
  double ridge = 1e-8;

  int run(const GlobalOptions& global, const LoadOptions& load,
          const CtrSourceOptions& ctr_source) const {
    auto dataset = load_dataset(load);
    auto ctr = make_ctr_fn(ctr_source, dataset);
    auto policy = BinnedPolicy::from_json(read_file(policy_path));

    std::vector<RerankSpec> specs;
    specs.push_back({RerankMethod::identity, top_k, budget});
    std::stringstream ss(methods);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty() || name == "identity") continue;
      specs.push_back({rerank_method_from_string(name), top_k, budget});
    }

    SimulationConfig cfg;
    cfg.mode = prediction_mode_from_string(mode);
    cfg.seed = global.seed;
    cfg.sigma = sigma;
    cfg.stock_mode = stock_mode_from_string(stock_mode);
    cfg.ridge_lambda = ridge;

    auto report = measure_addiction_shift(dataset, policy, specs, ctr, cfg);

    json obj;
    obj["methods"] = json::array();
    std::ostringstream bars;
    bars << "method,w,peak_minutes,mean_predicted_c\n";
    for (const auto& method : report.methods) {
      json m;
      m["method"] = to_string(method.spec.method);
      m["a"] = method.params.a;
      m["b"] = method.params.b;
      m["w"] = method.params.w;
      m["peak_minutes"] = method.metrics.peak_minutes;
      m["addicted"] = method.metrics.addicted;
      m["mean_predicted_c"] = method.mean_predicted_c;
      m["exposure"] = method.exposure;
      obj["methods"].push_back(std::move(m));
      bars << to_string(method.spec.method) << ','
           << format_double(method.params.w) << ','
           << format_double(method.metrics.peak_minutes) << ','
           << format_double(method.mean_predicted_c) << '\n';
      write_text(fs::path(global.out_dir) /
                     ("curve_" + std::string(to_string(method.spec.method)) +
                      ".csv"),
                 curve_csv(method.mean_curve));
    }
    write_json_file(fs::path(global.out_dir) / "simulation_report.json", obj);
    write_text(fs::path(global.out_dir) / "shift_bars.csv", bars.str());
    std::cout << obj.dump(2) << "\n";
    return 0;
  }
};

struct EvaluateCommand {
  std::string policy_path;
  std::string unit = "consumption";
  double sigma = 0.9;
  std::string stock_mode = "recurrence";

  int run(const GlobalOptions& global, const LoadOptions& load) const {
    auto dataset = load_dataset(load);
    auto policy = BinnedPolicy::from_json(read_file(policy_path));
    SimulationConfig cfg;
    cfg.seed = global.seed;
    cfg.sigma = sigma;
    cfg.stock_mode = stock_mode_from_string(stock_mode);
    auto sims = simulate_sessions(dataset, policy,
                                  {RerankMethod::identity, {}, 0.0}, cfg);
    std::vector<std::vector<double>> pred;
    pred.reserve(sims.size());
    for (auto& sim : sims) pred.push_back(std::move(sim.predicted_c));
    auto report = compute_metrics(pred, logged_consumption(dataset),
                                  metric_unit_from_string(unit));
    json obj;
    obj["session_mae"] = report.session_mae;
    obj["session_rmse"] = report.session_rmse;
    obj["video_mae"] = report.video_mae;
    obj["video_rmse"] = report.video_rmse;
    obj["unit"] = to_string(report.unit);
    obj["n_sessions"] = report.n_sessions;
    obj["n_videos"] = report.n_videos;
    write_json_file(fs::path(global.out_dir) / "metrics.json", obj);
    std::cout << obj.dump(2) << "\n";
    return 0;
  }
};

struct ReportCommand {
  std::size_t folds = 10;
  std::string groupings = "frequency,gender,age_group,residence,income_band";
  double addicted_threshold = 0.05;
  double sigma = 0.9;
  std::string stock_mode = "recurrence";
  double ridge = 1e-8;
  std::size_t min_obs = 9;

  int run(const GlobalOptions& global, const LoadOptions& load,
          const CtrSourceOptions& ctr_source) const {
    auto dataset = load_dataset(load);
    auto ctr = make_ctr_fn(ctr_source, dataset);
    const StockMode mode = stock_mode_from_string(stock_mode);
    FitOptions options{sigma, mode, ridge, min_obs};

    auto fold_params =
        crossval_addiction(dataset, folds, global.seed, ctr, options);
    json obj;
    obj["folds"] = json::array();
    std::vector<double> a_vals, b_vals, w_vals;
    for (const auto& p : fold_params) {
      obj["folds"].push_back(params_to_json(p, sigma, mode));
      a_vals.push_back(p.a);
      b_vals.push_back(p.b);
      w_vals.push_back(p.w);
    }
    std::ostringstream box;
    box << "param,min,q1,median,q3,max\n";
    auto emit_quantiles = [&box](const char* name, std::vector<double> v) {
      box << name << ',' << format_double(quantile(v, 0.0)) << ','
          << format_double(quantile(v, 0.25)) << ','
          << format_double(quantile(v, 0.5)) << ','
          << format_double(quantile(v, 0.75)) << ','
          << format_double(quantile(v, 1.0)) << '\n';
    };
    emit_quantiles("a", a_vals);
    emit_quantiles("b", b_vals);
    emit_quantiles("w", w_vals);

    auto data = build_regression_data(dataset, ctr, sigma, mode);
    auto shared =
        fit_addiction(data.flat_targets, data.flat_c, data.flat_stock, ridge);
    obj["shared_params"] = params_to_json(shared, sigma, mode);

    obj["breakdowns"] = json::array();
    std::stringstream ss(groupings);
    std::string grouping;
    while (std::getline(ss, grouping, ',')) {
      if (grouping.empty()) continue;
      auto breakdown = cohort_breakdown(dataset, grouping, ctr, shared, options,
                                        addicted_threshold);
      json b;
      b["grouping"] = breakdown.grouping;
      b["groups"] = json::array();
      for (const auto& group : breakdown.groups) {
        json g;
        g["key"] = group.key;
        g["users"] = group.user_count;
        g["fallbacks"] = group.fallback_count;
        g["addicted_share"] = group.addicted_share;
        g["a"] = group.mean_params.a;
        g["b"] = group.mean_params.b;
        g["w"] = group.mean_params.w;
        g["peak_minutes"] = group.metrics.peak_minutes;
        b["groups"].push_back(std::move(g));
      }
      for (const auto& warning : breakdown.warnings) {
        std::cerr << "warning: " << warning << "\n";
      }
      obj["breakdowns"].push_back(std::move(b));
    }

    write_json_file(fs::path(global.out_dir) / "report.json", obj);
    write_text(fs::path(global.out_dir) / "boxplot.csv", box.str());
    std::cout << "wrote " << global.out_dir << "/report.json and boxplot.csv\n";
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "watchsim: addiction measurement and watch-time simulation for "
      "short-video interaction logs"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonOrTomlConfig>());
  app.set_config("--config", "", "TOML or JSON config file");

  GlobalOptions global;
  app.add_option("--seed", global.seed, "global rng seed")->capture_default_str();
  app.add_option("--out-dir", global.out_dir, "output directory")
      ->capture_default_str();

  auto synth = std::make_shared<SynthCommand>();
  {
    auto* cmd = app.add_subcommand(
        "synth", "generate a synthetic dataset with known addiction params");
    cmd->add_option("--cohort", synth->cohorts,
                    "name:a,b,w,coupling,users,sessions,mean_len (repeatable)")
        ->required();
    cmd->add_option("--noise-sd", synth->noise_sd, "consumption/target noise");
    cmd->add_option("--sigma", synth->sigma, "stock depreciation");
    cmd->add_option("--c-max", synth->c_max, "consumption ceiling");
    cmd->add_option("--out", synth->out, "output file (.csv or .jsonl)");
  }

  auto ingest_load = std::make_shared<LoadOptions>();
  add_load_options(
      app.add_subcommand("ingest", "validate, filter, and segment a log"),
      *ingest_load);

  auto fit_ctr = std::make_shared<FitCtrCommand>();
  auto fit_ctr_load = std::make_shared<LoadOptions>();
  {
    auto* cmd =
        app.add_subcommand("fit-ctr", "train the click-through-rate model");
    add_load_options(cmd, *fit_ctr_load);
    cmd->add_option("--d", fit_ctr->config.d, "embedding dimension");
    cmd->add_option("--hidden-dim", fit_ctr->config.hidden_dim, "hidden width");
    cmd->add_option("--lr", fit_ctr->config.learning_rate, "learning rate");
    cmd->add_option("--epochs", fit_ctr->config.epochs, "epochs");
    cmd->add_option("--batch-size", fit_ctr->config.batch_size,
                    "minibatch size (0 = full batch)");
    cmd->add_option("--out", fit_ctr->out, "model output path");
  }

  auto fit_add = std::make_shared<FitAddictionCommand>();
  auto fit_add_load = std::make_shared<LoadOptions>();
  auto fit_add_ctr = std::make_shared<CtrSourceOptions>();
  {
    auto* cmd = app.add_subcommand(
        "fit-addiction", "fit the quadratic-utility addiction regression");
    add_load_options(cmd, *fit_add_load);
    add_ctr_source_options(cmd, *fit_add_ctr);
    cmd->add_option("--sigma", fit_add->sigma, "stock depreciation");
    cmd->add_option("--stock-mode", fit_add->stock_mode, "recurrence|literal");
    cmd->add_option("--ridge", fit_add->ridge, "ridge lambda");
    cmd->add_option("--out", fit_add->out, "params output path");
  }

  auto curves = std::make_shared<CurvesCommand>();
  auto curves_load = std::make_shared<LoadOptions>();
  {
    auto* cmd =
        app.add_subcommand("curves", "emit cumulative utility curves as CSV");
    add_load_options(cmd, *curves_load);
    cmd->add_option("--params", curves->params_path, "addiction params JSON")
        ->required();
    cmd->add_option("--limit", curves->limit, "max per-session curve files");
  }

  auto rewards = std::make_shared<RewardsCommand>();
  auto rewards_load = std::make_shared<LoadOptions>();
  auto rewards_ctr = std::make_shared<CtrSourceOptions>();
  {
    auto* cmd =
        app.add_subcommand("rewards", "dump per-session addiction rewards");
    add_load_options(cmd, *rewards_load);
    add_ctr_source_options(cmd, *rewards_ctr);
    cmd->add_option("--params", rewards->params_path, "shared params JSON")
        ->required();
    cmd->add_option("--phi", rewards->phi, "temporal discount");
    cmd->add_option("--eta", rewards->eta, "allocation discount");
    cmd->add_option("--stage", rewards->stage, "shared|personalized|both");
    cmd->add_option("--min-obs", rewards->min_obs, "personalized fit floor");
    cmd->add_option("--ridge", rewards->ridge, "ridge lambda");
  }

  auto train = std::make_shared<TrainCommand>();
  auto train_load = std::make_shared<LoadOptions>();
  auto train_ctr_src = std::make_shared<CtrSourceOptions>();
  {
    auto* cmd = app.add_subcommand(
        "train", "two-stage group-relative policy optimization");
    add_load_options(cmd, *train_load);
    add_ctr_source_options(cmd, *train_ctr_src);
    cmd->add_option("--iters1", train->iters1, "stage-1 iterations");
    cmd->add_option("--iters2", train->iters2, "stage-2 iterations");
    cmd->add_option("--lr", train->lr, "learning rate");
    cmd->add_option("--group-size", train->group_size, "rollout group size G");
    cmd->add_option("--epsilon", train->epsilon, "clip range");
    cmd->add_option("--beta", train->beta, "KL coefficient");
    cmd->add_option("--phi", train->phi, "temporal discount");
    cmd->add_option("--eta", train->eta, "allocation discount");
    cmd->add_option("--sigma", train->sigma, "stock depreciation");
    cmd->add_option("--stock-mode", train->stock_mode, "recurrence|literal");
    cmd->add_flag("--no-stage1", train->no_stage1, "skip stage 1");
    cmd->add_flag("--no-stage2", train->no_stage2, "skip stage 2");
    cmd->add_flag("--sparse-reward", train->sparse_reward,
                  "assign the session reward only to the last video");
    cmd->add_option("--bins", train->bins, "consumption bins");
    cmd->add_option("--c-max", train->c_max, "consumption ceiling");
    cmd->add_option("--sessions-per-iter", train->sessions_per_iter,
                    "sessions sampled per iteration (0 = all)");
    cmd->add_option("--min-obs", train->min_obs, "personalized fit floor");
    cmd->add_option("--ridge", train->ridge, "ridge lambda");
    cmd->add_option("--log-file", train->log_file,
                    "per-iteration JSONL log (includes wallclock timings)");
  }

  auto simulate = std::make_shared<SimulateCommand>();
  auto simulate_load = std::make_shared<LoadOptions>();
  auto simulate_ctr = std::make_shared<CtrSourceOptions>();
  {
    auto* cmd = app.add_subcommand(
        "simulate", "re-rank sessions, predict watch time, refit addiction");
    add_load_options(cmd, *simulate_load);
    add_ctr_source_options(cmd, *simulate_ctr);
    cmd->add_option("--policy", simulate->policy_path, "trained policy JSON")
        ->required();
    cmd->add_option("--methods", simulate->methods, "comma-separated methods");
    cmd->add_option("--mode", simulate->mode, "greedy|sample");
    cmd->add_option("--budget", simulate->budget, "greedy_swap score budget");
    cmd->add_option("--top-k", simulate->top_k, "re-rank only this prefix");
    cmd->add_option("--sigma", simulate->sigma, "stock depreciation");
    cmd->add_option("--stock-mode", simulate->stock_mode, "recurrence|literal");
    cmd->add_option("--ridge", simulate->ridge, "ridge lambda");
  }

  auto evaluate = std::make_shared<EvaluateCommand>();
  auto evaluate_load = std::make_shared<LoadOptions>();
  {
    auto* cmd = app.add_subcommand(
        "evaluate", "session/video MAE and RMSE of policy predictions");
    add_load_options(cmd, *evaluate_load);
    cmd->add_option("--policy", evaluate->policy_path, "trained policy JSON")
        ->required();
    cmd->add_option("--unit", evaluate->unit, "consumption|seconds");
    cmd->add_option("--sigma", evaluate->sigma, "stock depreciation");
    cmd->add_option("--stock-mode", evaluate->stock_mode, "recurrence|literal");
  }

  auto report = std::make_shared<ReportCommand>();
  auto report_load = std::make_shared<LoadOptions>();
  auto report_ctr = std::make_shared<CtrSourceOptions>();
  {
    auto* cmd = app.add_subcommand(
        "report", "cross-validated fits and cohort breakdowns");
    add_load_options(cmd, *report_load);
    add_ctr_source_options(cmd, *report_ctr);
    cmd->add_option("--folds", report->folds, "cross-validation folds");
    cmd->add_option("--groupings", report->groupings,
                    "comma-separated grouping keys");
    cmd->add_option("--addicted-threshold", report->addicted_threshold,
                    "w zero band for the addicted share");
    cmd->add_option("--sigma", report->sigma, "stock depreciation");
    cmd->add_option("--stock-mode", report->stock_mode, "recurrence|literal");
    cmd->add_option("--ridge", report->ridge, "ridge lambda");
    cmd->add_option("--min-obs", report->min_obs, "personalized fit floor");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    json err;
    err["error"] = {{"type", "validation"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }

  try {
    fs::create_directories(global.out_dir);
    if (app.got_subcommand("synth")) return synth->run(global);
    if (app.got_subcommand("ingest")) return run_ingest(global, *ingest_load);
    if (app.got_subcommand("fit-ctr")) return fit_ctr->run(global, *fit_ctr_load);
    if (app.got_subcommand("fit-addiction")) {
      return fit_add->run(global, *fit_add_load, *fit_add_ctr);
    }
    if (app.got_subcommand("curves")) return curves->run(global, *curves_load);
    if (app.got_subcommand("rewards")) {
      return rewards->run(global, *rewards_load, *rewards_ctr);
    }
    if (app.got_subcommand("train")) {
      return train->run(global, *train_load, *train_ctr_src);
    }
    if (app.got_subcommand("simulate")) {
      return simulate->run(global, *simulate_load, *simulate_ctr);
    }
    if (app.got_subcommand("evaluate")) {
      return evaluate->run(global, *evaluate_load);
    }
    if (app.got_subcommand("report")) {
      return report->run(global, *report_load, *report_ctr);
    }
    throw ValidationError("no subcommand selected");
  } catch (const ValidationError& e) {
    json err;
    err["error"] = {{"type", "validation"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err;
    err["error"] = {{"type", "runtime"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
}
