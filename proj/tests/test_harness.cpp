#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "acumen/config.hpp"
#include "acumen/harness.hpp"
#include "acumen/metrics.hpp"

using namespace acumen;

TEST_CASE("collinear points have zero curvature") {
  const std::vector<std::array<double, 2>> pts{{0, 0}, {1, 0}, {2.5, 0}, {4, 0}};
  const TrajectoryMetrics m = traj_metrics(pts);
  CHECK(m.irregularity == 0.0);
  CHECK(m.length == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("a sampled unit semicircle has length and total curvature near pi") {
  std::vector<std::array<double, 2>> pts;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    const double a = std::numbers::pi * i / (n - 1);
    pts.push_back({std::cos(a), std::sin(a)});
  }
  const TrajectoryMetrics m = traj_metrics(pts);
  CHECK(std::abs(m.length - std::numbers::pi) < 0.01);
  CHECK(std::abs(m.irregularity - std::numbers::pi) < 0.05);
}

TEST_CASE("an open unit square turns three right angles") {
  const std::vector<std::array<double, 2>> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}};
  const TrajectoryMetrics m = traj_metrics(pts);
  CHECK(m.irregularity == doctest::Approx(3.0 * std::numbers::pi / 2).epsilon(1e-12));
}

TEST_CASE("tiny segments are skipped and short inputs are errors") {
  const std::vector<std::array<double, 2>> pts{{0, 0}, {1e-9, 0}, {1, 0}};
  const TrajectoryMetrics m = traj_metrics(pts);
  CHECK(m.irregularity == 0.0);
  const std::vector<std::array<double, 2>> one{{0, 0}};
  CHECK_THROWS_AS((void)traj_metrics(one), InsufficientDataError);
}

TEST_CASE("discrete curvature converges to the continuous integral on circles") {
  // an open polyline misses the closing turn, so the error decays as 2*pi/n
  double prev_err = 1e9;
  for (int n : {64, 256, 1024}) {
    std::vector<std::array<double, 2>> pts;
    for (int i = 0; i <= n; ++i) {
      const double a = 2.0 * std::numbers::pi * i / n;
      pts.push_back({std::cos(a), std::sin(a)});
    }
    const TrajectoryMetrics m = traj_metrics(pts);
    const double err = std::abs(m.irregularity - 2.0 * std::numbers::pi);
    CHECK(err < prev_err + 1e-12);
    prev_err = err;
  }
  CHECK(prev_err < 0.01);
}

TEST_CASE("configs parse, reject unknown keys and flag wrong types") {
  const std::string good = R"({
    "schema_version": 1,
    "variant": "belt-box",
    "seed": 9,
    "model": {"kind": "node", "hidden": [16, 16], "solver": {"kind": "dopri", "rtol": 1e-6, "atol": 1e-8}},
    "planner": {"mode": "cem", "n_population": 20, "n_elites": 5, "horizon": 4, "noise_beta": 2.0},
    "train": {"w_l": 10.0},
    "meta": {"n_envs": 20, "r_split": 0.75, "alpha": 5e-4, "sigma": 1e-2}
  })";
  const ExperimentConfig cfg = parse_config(good);
  CHECK(cfg.setup.variant == EnvVariant::kBeltBox);
  CHECK(cfg.seed == 9);
  CHECK(cfg.solver.kind == SolverSpec::Kind::kAdaptiveDopri);
  CHECK(cfg.setup.planner.n_population == 20);
  CHECK(cfg.setup.meta.n_envs == 20);

  const std::string bad_key = R"({"variant": "belt-box", "planner": {"n_pop": 3}})";
  CHECK_THROWS_AS((void)parse_config(bad_key), ConfigError);
  try {
    (void)parse_config(bad_key);
  } catch (const ConfigError& e) {
    CHECK(e.key_path == "planner.n_pop");
  }

  const std::string bad_type = R"({"variant": "belt-box", "seed": "nine"})";
  CHECK_THROWS_AS((void)parse_config(bad_type), ConfigError);
  const std::string bad_json = "{nope";
  CHECK_THROWS_AS((void)parse_config(bad_json), ConfigError);
}

TEST_CASE("metric lines are byte-stable") {
  MetaIterationMetrics m;
  m.iteration = 3;
  m.n_episodes = 8;
  m.solved_pct = 62.5;
  m.mean_steps_all = 41.25;
  m.std_steps_all = 3.5;
  m.n_solved = 5;
  m.mean_steps_solved = 30.2;
  m.std_steps_solved = 1.75;
  m.has_test = true;
  m.test_solved_pct = 55.0;
  const std::vector<MetaIterationMetrics> ms{m};
  std::stringstream a, b;
  write_meta_metrics(a, ms);
  write_meta_metrics(b, ms);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("\"iteration\":3") != std::string::npos);
  CHECK(a.str().find("\"test_solved_pct\":55") != std::string::npos);
}

TEST_CASE("random-command collection yields a usable dataset") {
  ExperimentConfig cfg = default_config(EnvVariant::kUnicycleWind);
  cfg.setup.episode.h_max = 20;
  EnvParams env;
  const auto data = collect_random_data(cfg.setup, env, 2, 77);
  CHECK(data.size() > 10);
  for (const auto& ex : data) {
    CHECK(ex.t_end > ex.t_start);
    for (double v : ex.target_delta) CHECK(std::isfinite(v));
  }
}

TEST_CASE("offline training reduces the loss on collected data") {
  ExperimentConfig cfg = default_config(EnvVariant::kUnicycleWind);
  cfg.setup.episode.h_max = 30;
  EnvParams env;  // still air
  const auto data = collect_random_data(cfg.setup, env, 3, 99);
  REQUIRE(data.size() > 20);
  Rng rng(5);
  NodeModel model(init_params(ModelShape::node(2, {16, 16}), rng), SolverSpec::rk4(4));
  const double before = training_loss(model, data, 1.0);
  const FitResult res = train_offline(model, data, 3e-3, 150, 16, 1.0, 11);
  CHECK(res.final_loss < before);
  CHECK(res.final_loss <= res.initial_loss);
}
