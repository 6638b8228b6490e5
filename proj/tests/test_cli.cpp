#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "watchsim/io.hpp"
#include "watchsim/policy.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

const std::string& cli_path() {
  static const std::string path = [] {
    const char* env = std::getenv("WATCHSIM_CLI");
    REQUIRE_MESSAGE(env != nullptr, "WATCHSIM_CLI must point at the binary");
    return std::string(env);
  }();
  return path;
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() /
          ("watchsim_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

RunResult run_cli(const Workspace& ws, const std::string& args) {
  const std::string out_file = ws.path("stdout.txt");
  const std::string err_file = ws.path("stderr.txt");
  const std::string command =
      cli_path() + " " + args + " >" + out_file + " 2>" + err_file;
  const int raw = std::system(command.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(raw);
  result.out = watchsim::read_file(out_file);
  result.err = watchsim::read_file(err_file);
  return result;
}

}  // namespace

TEST_CASE("cli pipeline runs end to end") {
  Workspace ws;
  const std::string data = ws.path("data.csv");
  const std::string out = ws.path("out");

  auto synth = run_cli(ws, "--seed 11 --out-dir " + out +
                               " synth --cohort main:2.0,1.0,0.4,0.3,6,8,12"
                               " --noise-sd 0.05 --out " + data);
  REQUIRE(synth.exit_code == 0);
  REQUIRE(fs::exists(data));

  auto ingest = run_cli(ws, "--out-dir " + out + " ingest --input " + data);
  CHECK(ingest.exit_code == 0);
  CHECK(fs::exists(out + "/ingest_summary.json"));

  auto fit_ctr = run_cli(ws, "--seed 3 --out-dir " + out +
                                 " fit-ctr --input " + data +
                                 " --epochs 5 --lr 0.02");
  REQUIRE(fit_ctr.exit_code == 0);

  auto fit = run_cli(ws, "--out-dir " + out + " fit-addiction --input " + data +
                             " --ctr-model " + out + "/ctr_model.json");
  REQUIRE(fit.exit_code == 0);
  json params = json::parse(watchsim::read_file(out + "/addiction_params.json"));
  CHECK(params.contains("a"));
  CHECK(params.contains("w"));
  CHECK(params["stock_mode"] == "recurrence");
  // Planted w = 0.4 should be visible even through the trained-ctr targets.
  CHECK(params["w"].get<double>() > 0.2);

  auto curves = run_cli(ws, "--out-dir " + out + " curves --input " + data +
                                " --params " + out +
                                "/addiction_params.json --limit 2");
  CHECK(curves.exit_code == 0);
  const std::string curve_text =
      watchsim::read_file(out + "/curves/curve_mean.csv");
  CHECK(curve_text.rfind("cumulative_minutes,cumulative_utility\n", 0) == 0);

  auto rewards = run_cli(ws, "--out-dir " + out + " rewards --input " + data +
                                 " --params " + out +
                                 "/addiction_params.json --planted-seed 11");
  CHECK(rewards.exit_code == 0);
  std::istringstream lines(watchsim::read_file(out + "/rewards.jsonl"));
  std::string line;
  std::size_t reward_rows = 0;
  while (std::getline(lines, line)) {
    json row = json::parse(line);
    CHECK(row.contains("session_total"));
    CHECK(row["per_video"].is_array());
    ++reward_rows;
  }
  CHECK(reward_rows == 2 * 48);  // both stages for 6 users x 8 sessions

  auto train = run_cli(ws, "--seed 5 --out-dir " + out + " train --input " +
                               data + " --planted-seed 11 --iters1 5 --iters2 5"
                               " --lr 0.1 --bins 8 --group-size 4");
  REQUIRE(train.exit_code == 0);
  auto policy = watchsim::BinnedPolicy::from_json(
      watchsim::read_file(out + "/policy.json"));
  CHECK(policy.bins() == 8);

  auto evaluate = run_cli(ws, "--out-dir " + out + " evaluate --input " + data +
                                  " --policy " + out + "/policy.json");
  CHECK(evaluate.exit_code == 0);
  json metrics = json::parse(watchsim::read_file(out + "/metrics.json"));
  CHECK(metrics["session_rmse"].get<double>() >=
        metrics["session_mae"].get<double>());
  CHECK(metrics["unit"] == "consumption");

  auto seconds = run_cli(ws, "--out-dir " + out + " evaluate --input " + data +
                                 " --policy " + out +
                                 "/policy.json --unit seconds");
  CHECK(seconds.exit_code == 0);

  auto simulate = run_cli(ws, "--seed 2 --out-dir " + out + " simulate --input " +
                                  data + " --policy " + out +
                                  "/policy.json --planted-seed 11"
                                  " --methods round_robin,maxmin_exposure");
  CHECK(simulate.exit_code == 0);
  json sim = json::parse(watchsim::read_file(out + "/simulation_report.json"));
  REQUIRE(sim["methods"].size() == 3);  // identity baseline + 2
  CHECK(sim["methods"][0]["method"] == "identity");
  CHECK(fs::exists(out + "/curve_round_robin.csv"));
  CHECK(fs::exists(out + "/shift_bars.csv"));

  auto report = run_cli(ws, "--seed 4 --out-dir " + out + " report --input " +
                                data + " --planted-seed 11 --folds 4"
                                " --groupings frequency,cohort");
  CHECK(report.exit_code == 0);
  json rep = json::parse(watchsim::read_file(out + "/report.json"));
  CHECK(rep["folds"].size() == 4);
  CHECK(rep["breakdowns"].size() == 2);
}

TEST_CASE("identical seeds produce byte-identical artifacts") {
  Workspace ws;
  const std::string args =
      " synth --cohort a:2.0,1.0,0.5,0.2,4,6,10 --cohort b:1.6,1.0,0.0,0.0,4,6,10"
      " --noise-sd 0.05";

  auto first = run_cli(ws, "--seed 101 --out-dir " + ws.path("o1") + args +
                               " --out " + ws.path("o1/data.csv"));
  auto second = run_cli(ws, "--seed 101 --out-dir " + ws.path("o2") + args +
                                " --out " + ws.path("o2/data.csv"));
  REQUIRE(first.exit_code == 0);
  REQUIRE(second.exit_code == 0);
  CHECK(watchsim::read_file(ws.path("o1/data.csv")) ==
        watchsim::read_file(ws.path("o2/data.csv")));

  for (const char* run : {"o1", "o2"}) {
    auto fit = run_cli(ws, "--seed 101 --out-dir " + ws.path(run) +
                               " fit-addiction --input " + ws.path(run) +
                               "/data.csv --planted-seed 101");
    REQUIRE(fit.exit_code == 0);
  }
  CHECK(watchsim::read_file(ws.path("o1/addiction_params.json")) ==
        watchsim::read_file(ws.path("o2/addiction_params.json")));
}

TEST_CASE("config files feed global flags") {
  Workspace ws;
  std::ofstream(ws.path("cfg.json")) << "{\"seed\": 77}\n";
  std::ofstream(ws.path("cfg.toml")) << "seed = 77\n";

  const std::string args =
      " synth --cohort main:2.0,1.0,0.3,0.0,3,4,8 --noise-sd 0.02";
  auto by_flag = run_cli(ws, "--seed 77 --out-dir " + ws.path("a") + args +
                                 " --out " + ws.path("a/data.csv"));
  auto by_json = run_cli(ws, "--config " + ws.path("cfg.json") + " --out-dir " +
                                 ws.path("b") + args + " --out " +
                                 ws.path("b/data.csv"));
  auto by_toml = run_cli(ws, "--config " + ws.path("cfg.toml") + " --out-dir " +
                                 ws.path("c") + args + " --out " +
                                 ws.path("c/data.csv"));
  REQUIRE(by_flag.exit_code == 0);
  REQUIRE(by_json.exit_code == 0);
  REQUIRE(by_toml.exit_code == 0);
  CHECK(watchsim::read_file(ws.path("a/data.csv")) ==
        watchsim::read_file(ws.path("b/data.csv")));
  CHECK(watchsim::read_file(ws.path("a/data.csv")) ==
        watchsim::read_file(ws.path("c/data.csv")));
}

TEST_CASE("failures exit 1 with machine-readable errors") {
  Workspace ws;
  SUBCASE("missing input file") {
    auto result = run_cli(ws, "fit-addiction --input /no/such/file.csv"
                              " --planted-seed 1 --out-dir " + ws.path("out"));
    CHECK(result.exit_code == 1);
    json err = json::parse(result.err);
    CHECK(err["error"]["type"] == "validation");
  }
  SUBCASE("bad flag value") {
    auto result = run_cli(ws, "synth --cohort nonsense --out-dir " + ws.path("o"));
    CHECK(result.exit_code == 1);
    json err = json::parse(result.err);
    CHECK(err["error"].contains("message"));
  }
  SUBCASE("malformed data file") {
    std::ofstream(ws.path("bad.csv")) << "not,a,valid,header\nrow\n";
    auto result = run_cli(ws, "--out-dir " + ws.path("out") +
                                  " ingest --input " + ws.path("bad.csv"));
    CHECK(result.exit_code == 1);
    json err = json::parse(result.err);
    CHECK(err["error"]["type"] == "validation");
  }
  SUBCASE("help exits zero") {
    auto result = run_cli(ws, "--help");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("synth") != std::string::npos);
  }
}
