#include <doctest.h>

#include <cmath>

#include "acumen/meta.hpp"

using namespace acumen;

namespace {

MetaSetup tiny_meta_setup(std::uint64_t seed) {
  MetaSetup s;
  s.variant = EnvVariant::kUnicycleWind;
  s.base_task.goal = {0.6, 0.0};
  s.randomize_goal_direction = true;
  s.episode.h_max = 12;
  s.episode.window_size = 3;
  s.episode.obs_rate_hz = 6.0;
  s.episode.cmd_period = 0.2;
  s.irregularity.k_s = 1;
  s.planner.mode = PlannerMode::kRandomShoot;
  s.planner.n_population = 21;
  s.planner.horizon = 1;
  s.planner.discrete_values = {{-0.1, 0.0, 0.1}, {-0.1, 0.0, 0.1}};
  s.train.learning_rate = 1e-3;
  s.train.n_iterations = 1;
  s.train.train_freq = 3;
  s.train.batch_size = 4;
  s.meta.n_envs = 3;
  s.meta.alpha = 1e-4;
  s.meta.sigma = 1e-2;
  s.meta.meta_iterations = 2;
  s.meta.m_test = 2;
  s.meta.eval_every = 1;
  s.meta.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("meta update follows the closed form") {
  const std::vector<double> theta{0.0, 0.0, 0.0};
  std::vector<MetaUpdateInput> in(1);
  in[0].val_loss = 2.0;
  in[0].epsilon = {1.0, 0.0, 0.0};
  const auto res = meta_update(theta, in, 1.0, 0.5);
  CHECK(res.theta[0] == -4.0);
  CHECK(res.theta[1] == 0.0);
  CHECK(res.theta[2] == 0.0);
}

TEST_CASE("zero losses leave the prior untouched") {
  const std::vector<double> theta{0.3, -0.7};
  std::vector<MetaUpdateInput> in(4);
  Rng rng(3);
  for (auto& i : in) {
    i.val_loss = 0.0;
    i.epsilon = {rng.normal(), rng.normal()};
  }
  const auto res = meta_update(theta, in, 0.1, 0.01);
  CHECK(res.theta == theta);
}

TEST_CASE("antisymmetric perturbations with equal losses cancel exactly") {
  const std::vector<double> theta{1.0, 2.0};
  std::vector<MetaUpdateInput> in(2);
  in[0].val_loss = 3.5;
  in[0].epsilon = {0.4, -1.2};
  in[1].val_loss = 3.5;
  in[1].epsilon = {-0.4, 1.2};
  const auto res = meta_update(theta, in, 0.7, 0.05);
  CHECK(res.theta[0] == 1.0);
  CHECK(res.theta[1] == 2.0);
}

TEST_CASE("the update is linear in the losses") {
  const std::vector<double> theta{0.0, 0.0};
  Rng rng(5);
  std::vector<MetaUpdateInput> in(3);
  for (auto& i : in) {
    i.val_loss = rng.uniform(0.1, 2.0);
    i.epsilon = {rng.normal(), rng.normal()};
  }
  const auto r1 = meta_update(theta, in, 0.2, 0.1);
  for (auto& i : in) i.val_loss *= 3.0;
  const auto r3 = meta_update(theta, in, 0.2, 0.1);
  CHECK(r3.theta[0] == doctest::Approx(3.0 * r1.theta[0]).epsilon(1e-12));
  CHECK(r3.theta[1] == doctest::Approx(3.0 * r1.theta[1]).epsilon(1e-12));
}

TEST_CASE("empty validation sets take the mean loss or skip the update") {
  const std::vector<double> theta{0.0};
  std::vector<MetaUpdateInput> in(2);
  in[0].val_loss = 2.0;
  in[0].epsilon = {1.0};
  in[1].val_empty = true;
  in[1].val_loss = 999.0;  // must be ignored
  in[1].epsilon = {1.0};
  const auto res = meta_update(theta, in, 1.0, 1.0);
  // both episodes effectively contribute loss 2.0
  CHECK(res.theta[0] == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(res.n_substituted == 1);

  std::vector<MetaUpdateInput> all_empty(2);
  for (auto& i : all_empty) {
    i.val_empty = true;
    i.epsilon = {1.0};
  }
  const auto skip = meta_update(theta, all_empty, 1.0, 1.0);
  CHECK(skip.skipped);
  CHECK(skip.theta == theta);
}

TEST_CASE("alpha = 0 keeps the prior while still producing reports") {
  MetaSetup s = tiny_meta_setup(31);
  s.meta.alpha = 0.0;
  Rng rng(7);
  const NodeModel proto(init_params(ModelShape::node(2, {6, 6}), rng), SolverSpec::rk4(3));
  const MetaTrainResult res = meta_train(proto, s);
  CHECK(res.theta_last == proto.params().values);
  CHECK(res.metrics.size() == 2);
  for (const auto& m : res.metrics) CHECK(m.n_episodes == 3);
}

TEST_CASE("sequential and parallel meta-iterations agree bit-for-bit") {
  Rng rng(11);
  const NodeModel proto(init_params(ModelShape::node(2, {6, 6}), rng), SolverSpec::rk4(3));
  MetaSetup s = tiny_meta_setup(41);
  s.meta.parallel = 1;
  const MetaTrainResult seq = meta_train(proto, s);
  s.meta.parallel = 4;
  const MetaTrainResult par = meta_train(proto, s);
  CHECK(seq.theta_last == par.theta_last);
  REQUIRE(seq.metrics.size() == par.metrics.size());
  for (std::size_t i = 0; i < seq.metrics.size(); ++i) {
    CHECK(seq.metrics[i].solved_pct == par.metrics[i].solved_pct);
    CHECK(seq.metrics[i].mean_steps_all == par.metrics[i].mean_steps_all);
    CHECK(seq.metrics[i].test_solved_pct == par.metrics[i].test_solved_pct);
  }
}

TEST_CASE("meta training is seed-reproducible") {
  Rng rng(13);
  const NodeModel proto(init_params(ModelShape::node(2, {6, 6}), rng), SolverSpec::rk4(3));
  const MetaSetup s = tiny_meta_setup(51);
  const MetaTrainResult a = meta_train(proto, s);
  const MetaTrainResult b = meta_train(proto, s);
  CHECK(a.theta_last == b.theta_last);
  CHECK(a.best_test_pct == b.best_test_pct);
}

TEST_CASE("solved-only mean steps never exceeds the all-episode mean when timeouts cap out") {
  Rng rng(17);
  const NodeModel proto(init_params(ModelShape::node(2, {6, 6}), rng), SolverSpec::rk4(3));
  MetaSetup s = tiny_meta_setup(61);
  s.meta.meta_iterations = 3;
  const MetaTrainResult res = meta_train(proto, s);
  for (const auto& m : res.metrics) {
    if (m.n_solved > 0 && m.n_solved < m.n_episodes)
      CHECK(m.mean_steps_solved <= m.mean_steps_all + 1e-9);
  }
}
