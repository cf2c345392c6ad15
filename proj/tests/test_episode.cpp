#include <doctest.h>

#include <cmath>

#include "acumen/episode.hpp"

using namespace acumen;

namespace {

std::vector<TimedEvent> make_window(int n, double dt = 0.3) {
  std::vector<TimedEvent> w;
  for (int i = 0; i < n; ++i)
    w.push_back({TimedEvent::Kind::kObservation, dt * i,
                 {0.05 * i, -0.02 * i, 0.01 * i}, false});
  return w;
}

EpisodeSetup base_unicycle_setup(std::uint64_t seed) {
  EpisodeSetup es;
  es.env.variant = EnvVariant::kUnicycleWind;
  es.env.wind_magnitude = 0.0;
  es.task.goal = {0.8, 0.0};
  es.episode.h_max = 60;
  es.episode.window_size = 4;
  es.episode.obs_rate_hz = 6.0;
  es.episode.cmd_period = 0.2;
  es.irregularity.k_s = 1;
  es.planner.mode = PlannerMode::kRandomShoot;
  es.planner.n_population = 21;
  es.planner.horizon = 1;
  es.planner.discrete_values = {{-0.1, -0.05, -0.01, 0.0, 0.01, 0.05, 0.1},
                                {-0.1, 0.0, 0.1}};
  es.train.learning_rate = 1e-3;
  es.train.lr_decay = 0.99;
  es.train.w_l = 1.0;
  es.train.n_iterations = 1;
  es.train.train_freq = 5;
  es.train.batch_size = 8;
  es.seed = seed;
  return es;
}

}  // namespace

TEST_CASE("five observations produce exactly four candidate pairs") {
  const auto window = make_window(5);
  ActionSchedule acts({0.05, 0.65}, {{0.1, 0.0}, {0.0, 0.1}});
  const auto split = sample_split(window, acts, 0.5, 77);
  CHECK(split.train.size() + split.val.size() == 4);
}

TEST_CASE("splits are seed-deterministic and windows smaller than 2 yield nothing") {
  const auto window = make_window(5);
  ActionSchedule acts({0.05}, {{0.1, 0.0}});
  const auto a = sample_split(window, acts, 0.6, 123);
  const auto b = sample_split(window, acts, 0.6, 123);
  CHECK(a.train.size() == b.train.size());
  CHECK(a.val.size() == b.val.size());
  for (std::size_t i = 0; i < a.train.size(); ++i)
    CHECK(a.train[i].t_start == b.train[i].t_start);

  const auto tiny = make_window(1);
  const auto none = sample_split(tiny, acts, 0.6, 123);
  CHECK(none.train.empty());
  CHECK(none.val.empty());
}

TEST_CASE("a near-one split ratio sends nearly everything to train") {
  const auto window = make_window(1001, 0.05);
  ActionSchedule acts({0.01}, {{0.1, 0.0}});
  const auto split = sample_split(window, acts, 0.99, 321);
  const double total = static_cast<double>(split.train.size() + split.val.size());
  CHECK(total == 1000.0);
  CHECK(static_cast<double>(split.train.size()) / total >= 0.97);
}

TEST_CASE("pair assignment is stable across overlapping windows") {
  const auto window = make_window(6);
  ActionSchedule acts({0.05}, {{0.1, 0.0}});
  const auto full = sample_split(window, acts, 0.5, 99);
  const std::vector<TimedEvent> shifted(window.begin() + 1, window.end());
  const auto sub = sample_split(shifted, acts, 0.5, 99, &window.front());
  // every pair of the shifted window already appeared in the full split with
  // the same train/val side
  auto side_of = [](const SampleSplitResult& s, double t0) {
    for (const auto& ex : s.train)
      if (ex.t_start == t0) return 0;
    return 1;
  };
  for (std::size_t k = 0; k + 1 < shifted.size(); ++k)
    CHECK(side_of(sub, shifted[k].t) == side_of(full, shifted[k].t));
}

TEST_CASE("the buffer keeps one copy of a repeated interval") {
  const auto window = make_window(5);
  ActionSchedule acts({0.05}, {{0.1, 0.0}});
  EpisodeBuffer buf;
  buf.add(sample_split(window, acts, 0.5, 7));
  const std::size_t n1 = buf.train().size() + buf.val().size();
  buf.add(sample_split(window, acts, 0.5, 7));
  const std::size_t n2 = buf.train().size() + buf.val().size();
  CHECK(n1 == 4);
  CHECK(n2 == 4);
}

TEST_CASE("an environment that starts solved applies no actions") {
  EpisodeSetup es = base_unicycle_setup(5);
  es.task.goal = {0.0, 0.0};  // already inside the tolerance at the origin
  const GroundTruthModel model(es.env);
  const EpisodeReport rep = run_episode(model, es);
  CHECK(rep.outcome == EpisodeStatus::kSolved);
  CHECK(rep.applied_actions == 0);
}

TEST_CASE("episodes never exceed the action budget and the event log is ordered") {
  EpisodeSetup es = base_unicycle_setup(6);
  es.task.goal = {50.0, 0.0};  // unreachable: guaranteed timeout
  es.episode.h_max = 30;
  es.irregularity.k_s = 2;
  es.irregularity.p_drop = 0.1;
  es.irregularity.action_time_jitter = true;
  es.adapt_online = false;  // the oracle has nothing to train
  const GroundTruthModel model(es.env);
  const EpisodeReport rep = run_episode(model, es);
  CHECK(rep.outcome == EpisodeStatus::kTimeout);
  CHECK(rep.applied_actions >= 30);
  int actions = 0;
  for (std::size_t i = 1; i < rep.events.size(); ++i)
    CHECK(rep.events[i].t >= rep.events[i - 1].t);
  for (const auto& e : rep.events) actions += e.kind == TimedEvent::Kind::kAction ? 1 : 0;
  CHECK(actions == rep.applied_actions);
}

TEST_CASE("a train cadence longer than the episode leaves the model untouched") {
  EpisodeSetup es = base_unicycle_setup(7);
  es.task.goal = {50.0, 0.0};
  es.episode.h_max = 10;
  es.train.train_freq = 1000;
  Rng rng(3);
  const NodeModel model(init_params(ModelShape::node(2, {8, 8}), rng), SolverSpec::rk4(4));
  const EpisodeReport rep = run_episode(model, es);
  CHECK(rep.theta_final == model.params().values);
}

TEST_CASE("seeded episodes replay bit-identically") {
  EpisodeSetup es = base_unicycle_setup(11);
  es.task.goal = {0.7, 0.2};
  es.irregularity.k_s = 2;
  es.irregularity.eta = 0.05;
  es.irregularity.action_time_jitter = true;
  es.episode.h_max = 40;
  Rng rng(5);
  const NodeModel model(init_params(ModelShape::node(2, {8, 8}), rng), SolverSpec::rk4(4));
  const EpisodeReport a = run_episode(model, es);
  const EpisodeReport b = run_episode(model, es);
  CHECK(a.outcome == b.outcome);
  CHECK(a.applied_actions == b.applied_actions);
  CHECK(a.theta_final == b.theta_final);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].t == b.events[i].t);
    CHECK(a.events[i].payload == b.events[i].payload);
  }
}

TEST_CASE("a competent model solves the straight-ahead goal quickly") {
  EpisodeSetup es = base_unicycle_setup(13);
  es.task.goal = {0.8, 0.0};
  es.episode.h_max = 100;
  es.adapt_online = false;
  const GroundTruthModel model(es.env);
  const EpisodeReport rep = run_episode(model, es);
  CHECK(rep.outcome == EpisodeStatus::kSolved);
  CHECK(rep.applied_actions < 60);
}
