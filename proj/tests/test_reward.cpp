#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>

#include "watchsim/corpus.hpp"
#include "watchsim/errors.hpp"
#include "watchsim/reward.hpp"
#include "watchsim/rng.hpp"

using namespace watchsim;

TEST_CASE("session reward discounts per step") {
  AddictionParams p{2.0, 1.0, 0.5};
  SUBCASE("single step at phi = 1") {
    auto series = make_series(std::vector<double>{1.0}, 0.9);
    CHECK(session_reward(p, series, 1.0) == doctest::Approx(1.5));
  }
  SUBCASE("empty series is zero") {
    ConsumptionSeries empty;
    CHECK(session_reward(p, empty, 0.7) == doctest::Approx(0.0));
  }
  SUBCASE("two identical steps at phi = 0.5 sum geometric weights") {
    // Zero stock effect so both steps carry the same per-step utility.
    AddictionParams flat{2.0, 1.0, 0.0};
    ConsumptionSeries series;
    series.c = {1.0, 1.0};
    series.stock = {0.0, 1.0};
    series.sigma = 0.9;
    const double u = utility(flat, 1.0, 0.0);
    CHECK(session_reward(flat, series, 0.5) == doctest::Approx(0.75 * u));
  }
  SUBCASE("zero consumption gives zero reward for any params") {
    auto series = make_series(std::vector<double>(4, 0.0), 0.9);
    CHECK(session_reward(p, series, 0.8) == doctest::Approx(0.0));
  }
}

TEST_CASE("allocation spreads the session total") {
  SUBCASE("hand powers") {
    auto out = allocate_rewards(10.0, 3, 0.5);
    REQUIRE(out.size() == 3);
    CHECK(out[0] == doctest::Approx(2.5));
    CHECK(out[1] == doctest::Approx(5.0));
    CHECK(out[2] == doctest::Approx(10.0));
  }
  SUBCASE("eta = 1 repeats the total") {
    for (double v : allocate_rewards(3.5, 4, 1.0)) {
      CHECK(v == doctest::Approx(3.5));
    }
  }
  SUBCASE("single video gets everything") {
    auto out = allocate_rewards(-2.0, 1, 0.9);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == doctest::Approx(-2.0));
  }
  SUBCASE("allocations share the sign of the total") {
    RngStream rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const double total = rng.next_gaussian(0.0, 5.0);
      for (double v : allocate_rewards(total, 5, 0.6)) {
        if (total > 0) CHECK(v >= 0.0);
        if (total < 0) CHECK(v <= 0.0);
      }
    }
  }
}

TEST_CASE("group advantages standardize rewards") {
  SUBCASE("sample std of [1,2,3] is 1") {
    auto adv = group_advantages({1.0, 2.0, 3.0});
    CHECK(adv.advantages[0] == doctest::Approx(-1.0));
    CHECK(adv.advantages[1] == doctest::Approx(0.0));
    CHECK(adv.advantages[2] == doctest::Approx(1.0));
  }
  SUBCASE("degenerate groups collapse to zero") {
    for (double v : group_advantages({5.0, 5.0, 5.0}).advantages) {
      CHECK(v == 0.0);
    }
  }
  SUBCASE("pair case") {
    auto adv = group_advantages({0.0, 4.0});
    CHECK(std::fabs(adv.advantages[0] + 0.7071) < 1e-4);
    CHECK(std::fabs(adv.advantages[1] - 0.7071) < 1e-4);
  }
  SUBCASE("population std uses divisor G") {
    auto adv = group_advantages({0.0, 4.0}, 1e-8, true);
    CHECK(adv.advantages[1] == doctest::Approx(1.0));
  }
  SUBCASE("groups of one are rejected") {
    CHECK_THROWS_AS(group_advantages({1.0}), ValidationError);
  }
  SUBCASE("shift and scale invariance") {
    RngStream rng(17);
    std::vector<double> rewards(8);
    for (auto& r : rewards) r = rng.next_gaussian(0.0, 2.0);
    auto base = group_advantages(rewards);
    const double s = 2.5, t = -7.0;
    std::vector<double> moved;
    for (double r : rewards) moved.push_back(s * r + t);
    auto shifted = group_advantages(moved);
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      CHECK(shifted.advantages[i] == doctest::Approx(base.advantages[i]));
    }
  }
  SUBCASE("advantages are mean-zero when not degenerate") {
    RngStream rng(29);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> rewards(6);
      for (auto& r : rewards) r = rng.next_gaussian(1.0, 3.0);
      auto adv = group_advantages(rewards);
      double mean = 0.0;
      for (double a : adv.advantages) mean += a;
      CHECK(std::fabs(mean / 6.0) < 1e-9);
    }
  }
}

TEST_CASE("reward config validation") {
  RewardConfig cfg;
  validate(cfg);
  cfg.phi = 0.0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg.phi = 1.0;
  cfg.eta = 1.5;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg.eta = 0.9;
  cfg.group_size = 1;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
}

namespace {

CtrFn planted_ctr_fn(const Dataset& dataset, std::uint64_t seed) {
  auto plant = std::make_shared<PlantedClickModel>(seed);
  auto groups = std::make_shared<std::map<std::string, UserGroup>>(
      compute_user_groups(dataset, {}));
  return [plant, groups](const InteractionRecord& rec) {
    return plant->ctr(rec, groups->at(rec.user_id));
  };
}

}  // namespace

TEST_CASE("personalized fit on a single-user dataset equals the global fit") {
  SyntheticSpec spec;
  spec.cohorts.push_back({"solo", 2.0, 1.0, 0.4, 0.0, 1, 10, 15.0});
  spec.noise_sd = 0.05;
  spec.seed = 71;
  auto dataset = generate_synthetic(spec);
  auto ctr = planted_ctr_fn(dataset, spec.seed);

  auto data = build_regression_data(dataset, ctr, 0.9);
  auto global = fit_addiction(data.flat_targets, data.flat_c, data.flat_stock);

  AddictionParams shared{1.0, 1.0, 0.0};
  auto personal =
      fit_personalized(dataset, dataset.user_ids()[0], ctr, shared, {});
  CHECK_FALSE(personal.used_fallback);
  CHECK(personal.params.a == doctest::Approx(global.a));
  CHECK(personal.params.b == doctest::Approx(global.b));
  CHECK(personal.params.w == doctest::Approx(global.w));
}

TEST_CASE("sparse users fall back to the shared parameters") {
  InteractionRecord rec;
  rec.user_id = "tiny";
  rec.item_id = "v1";
  rec.timestamp = 1.0;
  rec.watch_time = 10.0;
  rec.video_length = 20.0;
  rec.categories = {"news"};
  Dataset dataset;
  dataset.sessions.push_back({"tiny", {rec, rec}});

  AddictionParams shared{2.0, 1.0, 0.5};
  CtrFn ctr = [](const InteractionRecord&) { return 0.5; };
  auto personal = fit_personalized(dataset, "tiny", ctr, shared, {});
  CHECK(personal.used_fallback);
  CHECK(personal.params.a == doctest::Approx(shared.a));
  CHECK(personal.params.w == doctest::Approx(shared.w));

  CHECK_THROWS_AS(fit_personalized(dataset, "nobody", ctr, shared, {}),
                  ValidationError);
}

TEST_CASE("per-user fits separate planted cohorts") {
  SyntheticSpec spec;
  spec.cohorts.push_back({"calm", 2.0, 1.0, 0.0, 0.0, 12, 8, 15.0});
  spec.cohorts.push_back({"hooked", 2.0, 1.0, 0.4, 0.0, 12, 8, 15.0});
  spec.noise_sd = 0.05;
  spec.seed = 83;
  auto dataset = generate_synthetic(spec);
  auto ctr = planted_ctr_fn(dataset, spec.seed);

  AddictionParams shared{2.0, 1.0, 0.2};
  auto fits = fit_all_personalized(dataset, ctr, shared, {});

  std::map<std::string, std::pair<double, std::size_t>> by_cohort;
  std::map<std::string, std::string> cohort_of;
  for (const auto& session : dataset.sessions) {
    cohort_of[session.user_id] = session.records.front().user_attrs.at("cohort");
  }
  for (const auto& [user, fit] : fits) {
    CHECK_FALSE(fit.used_fallback);
    auto& [sum, n] = by_cohort[cohort_of.at(user)];
    sum += fit.params.w;
    ++n;
  }
  const double calm_w = by_cohort["calm"].first /
                        static_cast<double>(by_cohort["calm"].second);
  const double hooked_w = by_cohort["hooked"].first /
                          static_cast<double>(by_cohort["hooked"].second);
  const double gap = hooked_w - calm_w;
  CHECK(std::fabs(gap - 0.4) / 0.4 < 0.2);
}

TEST_CASE("stage rewards coincide when parameters are equal") {
  AddictionParams shared{2.0, 1.0, 0.3};
  PersonalizedParams fallback{shared, true};
  auto series = make_series(std::vector<double>{1.0, 2.0, 1.5}, 0.9);
  CHECK(session_reward(shared, series, 0.9) ==
        doctest::Approx(session_reward(fallback.params, series, 0.9)));
}
