#include "acumen/selftest.hpp"

#include <cmath>
#include <sstream>

#include "acumen/episode.hpp"
#include "acumen/meta.hpp"
#include "acumen/metrics.hpp"
#include "acumen/num_io.hpp"
#include "acumen/ode.hpp"
#include "acumen/planner.hpp"
#include "acumen/train.hpp"

namespace acumen {

namespace {

using Check = std::pair<bool, std::string>;

Check check_rk4_analytic() {
  auto field = [](double, std::span<const double> z, std::span<const double>,
                  std::span<double> dz) { dz[0] = -z[0]; };
  const double z0 = 1.0;
  const auto y = integrate_rk4<double>(field, std::span<const double>(&z0, 1), 0.0, 1.0, 100);
  const double err = std::abs(y[0] - std::exp(-1.0));
  return {err < 1e-6, "|error| = " + fmt_double(err)};
}

Check check_rk4_order() {
  auto field = [](double, std::span<const double> z, std::span<const double>,
                  std::span<double> dz) { dz[0] = -z[0]; };
  const double z0 = 1.0;
  const double exact = std::exp(-1.0);
  const auto run = [&](int n) {
    return std::abs(
        integrate_rk4<double>(field, std::span<const double>(&z0, 1), 0.0, 1.0, n)[0] - exact);
  };
  const double ratio = run(20) / run(40);
  return {ratio >= 12.0 && ratio <= 20.0, "halving-step error ratio = " + fmt_double(ratio)};
}

Check check_dopri_tolerance() {
  auto field = [](double, std::span<const double> z, std::span<const double>,
                  std::span<double> dz) { dz[0] = -z[0]; };
  const double z0 = 1.0;
  const auto y =
      integrate_dopri(field, std::span<const double>(&z0, 1), 0.0, 1.0, 1e-8, 1e-8);
  const double err = std::abs(y[0] - std::exp(-1.0));
  return {err < 1e-6, "|error| = " + fmt_double(err)};
}

Check check_interpolation() {
  ActionSchedule s({0.0, 1.0}, {{0.0}, {2.0}});
  const bool ok = s.value(0.5)[0] == 1.0 && s.value(1.0)[0] == 2.0 && s.value(3.0)[0] == 2.0;
  return {ok, "midpoint/knot/hold"};
}

Check check_gradient_fd() {
  Rng rng(7);
  const ModelShape shape = ModelShape::node(2, {8, 8});
  NodeModel model(init_params(shape, rng), SolverSpec::rk4(5));
  ActionSchedule sched({0.0, 0.4}, {{0.1, -0.05}, {-0.2, 0.15}});
  StateEstimate z0;
  z0.pose = {0.1, -0.2, 0.3};
  z0.vel = {0.05, 0.0, -0.1};
  TrainingExample ex{z0, 0.0, 0.4, {0.02, -0.01, 0.05, 0.0, 0.0, 0.0}, sched};
  const std::vector<TrainingExample> data{ex};

  const LossGradient lg = training_loss_gradient(model, data, 1.0);
  const double h = 1e-5;
  double max_rel = 0.0;
  std::vector<double> values = model.params().values;
  Rng pick(3);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t i =
        static_cast<std::size_t>(pick.uniform_int(static_cast<int>(values.size())));
    NodeModel m2(model.params(), SolverSpec::rk4(5));
    std::vector<double> v = values;
    v[i] = values[i] + h;
    m2.set_values(v);
    const double lp = training_loss(m2, data, 1.0);
    v[i] = values[i] - h;
    m2.set_values(v);
    const double lm = training_loss(m2, data, 1.0);
    const double fd = (lp - lm) / (2.0 * h);
    const double rel = std::abs(lg.grad[i] - fd) / (std::abs(fd) + 1e-8);
    max_rel = std::max(max_rel, rel);
  }
  return {max_rel < 1e-4, "max relative error vs central differences = " + fmt_double(max_rel)};
}

Check check_xi_wrap() {
  TimedEvent a{TimedEvent::Kind::kObservation, 0.0, {0.0, 0.0, 3.1}, false};
  TimedEvent b{TimedEvent::Kind::kObservation, 0.2, {0.0, 0.0, -3.1}, false};
  const StateEstimate z = xi_estimate(a, b);
  const double expect = (2.0 * std::numbers::pi - 6.2) / 0.2;
  return {std::abs(z.vel[2] - expect) < 1e-9,
          "wrapped yaw rate = " + fmt_double(z.vel[2])};
}

Check check_colored_noise() {
  Rng rng(11);
  const int n = 128, reps = 100;
  std::vector<double> psd(static_cast<std::size_t>(n / 2), 0.0);
  for (int r = 0; r < reps; ++r) {
    const auto y = powerlaw_gaussian(2.0, n, rng);
    for (int k = 1; k <= n / 2; ++k) {
      double re = 0.0, im = 0.0;
      for (int t = 0; t < n; ++t) {
        const double th = 2.0 * std::numbers::pi * k * t / n;
        re += y[static_cast<std::size_t>(t)] * std::cos(th);
        im -= y[static_cast<std::size_t>(t)] * std::sin(th);
      }
      psd[static_cast<std::size_t>(k - 1)] += re * re + im * im;
    }
  }
  // least-squares slope of log PSD vs log f
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int m = n / 2;
  for (int k = 1; k <= m; ++k) {
    const double x = std::log(static_cast<double>(k) / n);
    const double v = std::log(psd[static_cast<std::size_t>(k - 1)] / reps);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return {std::abs(slope + 2.0) < 0.3, "log-PSD slope = " + fmt_double(slope)};
}

Check check_rewards() {
  BoxRotationReward box;
  StateEstimate z;
  z.pose = {0.5, 0.0, std::numbers::pi / 2};
  const double r1 = reward_box(z, box);  // drift 0.5 > 0.3, yaw exact
  StateEstimate z2;
  z2.pose = {0.2, 0.0, std::numbers::pi / 2 + 0.2};
  const double r2 = reward_box(z2, box);
  GoalHeadingReward goal{{1.0, 0.0}, 5.0};
  StateEstimate a, b;
  b.pose = {1.0, 0.0, 0.0};
  const double r3 = reward_goal_heading(a, b, goal);
  const bool ok = std::abs(r1 + 5.0) < 1e-12 && std::abs(r2 + 0.04) < 1e-12 &&
                  std::abs(r3) < 1e-12;
  std::ostringstream d;
  d << fmt_double(r1) << ", " << fmt_double(r2) << ", " << fmt_double(r3);
  return {ok, d.str()};
}

Check check_shoot_tiebreak() {
  PlannerConfig cfg;
  cfg.mode = PlannerMode::kRandomShoot;
  cfg.n_population = 21;
  cfg.discrete_values = {{-0.1, -0.05, -0.01, 0.0, 0.01, 0.05, 0.1}, {-0.1, 0.0, 0.1}};
  cfg.plan_duration = 0.2;
  cfg.action_limit = 0.22;
  EnvParams env;
  GroundTruthModel model(env);
  StateEstimate z;
  // constant reward: every candidate predicts into the same grid cell
  OccupancyGrid grid({-1.0, 1.0}, {-1.0, 1.0}, 1);
  RewardSpec reward = ExplorationReward{&grid};
  Rng rng(5);
  const ShootResult res = shoot_select(model, z, 0.0, ActionSchedule{}, cfg, reward, rng);
  const bool ok = res.n_candidates == 21 && res.action[0] == 0.0 && res.action[1] == 0.0;
  return {ok, "21 candidates, chose (" + fmt_double(res.action[0]) + ", " +
                  fmt_double(res.action[1]) + ")"};
}

Check check_meta_update() {
  std::vector<double> theta{0.0, 0.0};
  std::vector<MetaUpdateInput> in(1);
  in[0].val_loss = 2.0;
  in[0].epsilon = {1.0, 0.0};
  const auto res = meta_update(theta, in, 1.0, 0.5);
  const bool ok = res.theta[0] == -4.0 && res.theta[1] == 0.0;
  return {ok, "theta' = (" + fmt_double(res.theta[0]) + ", " + fmt_double(res.theta[1]) + ")"};
}

Check check_split_determinism() {
  std::vector<TimedEvent> window;
  for (int i = 0; i < 5; ++i)
    window.push_back({TimedEvent::Kind::kObservation, 0.3 * i, {0.1 * i, 0.0, 0.0}, false});
  ActionSchedule acts({0.1, 0.5, 0.9}, {{0.1, 0.0}, {0.2, 0.0}, {0.0, 0.1}});
  const auto s1 = sample_split(window, acts, 0.75, 42);
  const auto s2 = sample_split(window, acts, 0.75, 42);
  const bool ok = s1.train.size() + s1.val.size() == 4 &&
                  s1.train.size() == s2.train.size() && s1.val.size() == s2.val.size();
  return {ok, std::to_string(s1.train.size()) + " train / " + std::to_string(s1.val.size()) +
                  " val, stable"};
}

Check check_traj_metrics() {
  const std::vector<std::array<double, 2>> square{
      {0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {0.0, 0.0}};
  const TrajectoryMetrics m = traj_metrics(square);
  const bool ok = std::abs(m.irregularity - 3.0 * std::numbers::pi / 2) < 1e-12 &&
                  std::abs(m.length - 4.0) < 1e-12;
  return {ok, "length = " + fmt_double(m.length) +
                  ", total curvature = " + fmt_double(m.irregularity)};
}

Check check_event_log_roundtrip() {
  std::vector<TimedEvent> events;
  Rng rng(9);
  double t = 0.0;
  for (int i = 0; i < 40; ++i) {
    t += rng.uniform(0.01, 0.3);
    TimedEvent e;
    e.kind = i % 3 == 0 ? TimedEvent::Kind::kAction : TimedEvent::Kind::kObservation;
    e.t = t;
    e.payload = e.kind == TimedEvent::Kind::kAction
                    ? std::vector<double>{rng.normal(), rng.normal()}
                    : std::vector<double>{rng.normal(), rng.normal(), rng.normal()};
    events.push_back(std::move(e));
  }
  std::stringstream ss;
  write_event_log(ss, events);
  const auto back = read_event_log(ss);
  bool ok = back.size() == events.size();
  if (ok) {
    for (std::size_t i = 0; i < events.size(); ++i) {
      ok = ok && back[i].t == events[i].t && back[i].payload == events[i].payload &&
           back[i].kind == events[i].kind;
    }
  }
  return {ok, "40 events, bit-exact"};
}

}  // namespace

std::vector<SelfTestResult> run_selftests() {
  const std::vector<std::pair<std::string, Check (*)()>> checks{
      {"rk4-analytic-decay", check_rk4_analytic},
      {"rk4-order", check_rk4_order},
      {"dopri-tolerance", check_dopri_tolerance},
      {"schedule-interpolation", check_interpolation},
      {"gradient-finite-difference", check_gradient_fd},
      {"xi-yaw-wrap", check_xi_wrap},
      {"colored-noise-psd", check_colored_noise},
      {"reward-formulas", check_rewards},
      {"shoot-tie-break", check_shoot_tiebreak},
      {"meta-update-formula", check_meta_update},
      {"split-determinism", check_split_determinism},
      {"trajectory-metrics", check_traj_metrics},
      {"event-log-roundtrip", check_event_log_roundtrip},
  };
  std::vector<SelfTestResult> results;
  for (const auto& [name, fn] : checks) {
    SelfTestResult r;
    r.name = name;
    try {
      const Check c = fn();
      r.pass = c.first;
      r.detail = c.second;
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace acumen
