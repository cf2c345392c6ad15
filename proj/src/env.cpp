#include "acumen/env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "acumen/errors.hpp"
#include "acumen/num_io.hpp"
#include "acumen/ode.hpp"

namespace acumen {

double EnvParams::wind_angle() const {
  return wind_index * 2.0 * std::numbers::pi / n_directions;
}

std::array<double, 2> EnvParams::wind_vector() const {
  const double a = wind_angle();
  return {wind_magnitude * std::cos(a), wind_magnitude * std::sin(a)};
}

EnvParams sample_env(EnvSplit split, EnvVariant variant, Rng& rng, int n_directions) {
  EnvParams env;
  env.variant = variant;
  if (variant == EnvVariant::kUnicycleWind) {
    if (n_directions % 2 != 0) throw ShapeError("wind direction count must be even");
    env.n_directions = n_directions;
    const int k = rng.uniform_int(n_directions / 2);
    env.wind_index = split == EnvSplit::kTrain ? 2 * k : 2 * k + 1;
    env.wind_magnitude = kWindMagnitudes[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(kWindMagnitudes.size())))];
  } else {
    env.kappa_m = rng.uniform(0.3, 1.0);
    env.kappa_r = rng.uniform(0.5, 2.0);
    env.kappa_s = rng.uniform(-0.2, 0.2);
  }
  return env;
}

std::array<double, 3> truth_derivative(const EnvParams& env, const std::array<double, 3>& z,
                                       std::span<const double> u) {
  if (u.size() != 2) throw ShapeError("expected a 2-D command");
  const double psi = z[2];
  if (env.variant == EnvVariant::kUnicycleWind) {
    const auto wind = env.wind_vector();
    return {u[0] * std::cos(psi) + wind[0], u[0] * std::sin(psi) + wind[1], u[1]};
  }
  const double forward = env.kappa_m * 0.5 * (u[0] + u[1]);
  const double diff = u[1] - u[0];
  const double slip = env.kappa_s * diff;
  return {forward * std::cos(psi) - slip * std::sin(psi),
          forward * std::sin(psi) + slip * std::cos(psi), env.kappa_r * diff};
}

std::array<double, 3> step_truth(const EnvParams& env, const std::array<double, 3>& z,
                                 std::span<const double> u, double dt, bool* clamped) {
  if (!(dt > 0.0)) throw OrderingError("step_truth requires dt > 0");
  const double lim = env.action_limit();
  std::array<double, 2> uc{};
  bool any_clamped = false;
  for (std::size_t i = 0; i < 2; ++i) {
    uc[i] = std::clamp(u[i], -lim, lim);
    any_clamped |= uc[i] != u[i];
  }
  if (clamped != nullptr) *clamped = any_clamped;

  auto field = [&](double, std::span<const double> zz, std::span<const double>,
                   std::span<double> dz) {
    const auto d = truth_derivative(env, {zz[0], zz[1], zz[2]}, uc);
    dz[0] = d[0];
    dz[1] = d[1];
    dz[2] = d[2];
  };
  const auto y = integrate_rk4<double>(field, std::span<const double>(z), 0.0, dt, 1);
  return {y[0], y[1], wrap_angle(y[2])};
}

void IrregularityConfig::validate() const {
  if (k_s < 1) throw ShapeError("k_s must be >= 1");
  if (eta < 0.0 || eta >= 1.0) throw ShapeError("eta must be in [0,1)");
  if (p_drop < 0.0 || p_drop >= 1.0) throw ShapeError("p_drop must be in [0,1)");
}

std::vector<TimedEvent> emit_observations(const std::vector<TimedEvent>& nominal,
                                          const IrregularityConfig& cfg, Rng rng) {
  cfg.validate();
  ObservationThinner thinner(cfg, std::move(rng));
  std::vector<TimedEvent> out;
  for (const TimedEvent& e : nominal) {
    if (auto kept = thinner.push(e)) out.push_back(std::move(*kept));
  }
  return out;
}

ObservationThinner::ObservationThinner(const IrregularityConfig& cfg, Rng rng)
    : cfg_(cfg), rng_(std::move(rng)) {
  cfg_.validate();
}

std::optional<TimedEvent> ObservationThinner::push(TimedEvent obs) {
  if (block_pos_ == 0) survivor_ = rng_.uniform_int(cfg_.k_s);
  const bool is_survivor = block_pos_ == survivor_;
  block_pos_ = (block_pos_ + 1) % cfg_.k_s;
  if (!is_survivor) return std::nullopt;
  const bool drop_eta = rng_.bernoulli(cfg_.eta);
  const bool drop_p = rng_.bernoulli(cfg_.p_drop);
  if (drop_eta || drop_p) return std::nullopt;
  return obs;
}

StateEstimate xi_estimate(const TimedEvent& prev, const TimedEvent& cur) {
  if (prev.payload.size() != 3 || cur.payload.size() != 3)
    throw ShapeError("observations must carry a pose 3-vector");
  if (!(cur.t > prev.t)) throw OrderingError("observations out of order");
  const double dt = cur.t - prev.t;
  if (dt < 1e-6) throw DegenerateIntervalError("observation interval below 1e-6 s");
  StateEstimate z;
  z.pose = {cur.payload[0], cur.payload[1], wrap_angle(cur.payload[2])};
  z.vel = {(cur.payload[0] - prev.payload[0]) / dt,
           (cur.payload[1] - prev.payload[1]) / dt,
           wrap_angle(cur.payload[2] - prev.payload[2]) / dt};
  return z;
}

void EpisodeConfig::validate() const {
  if (h_max < 1) throw ShapeError("h_max must be >= 1");
  if (apply_horizon < 1) throw ShapeError("apply horizon must be >= 1");
  if (window_size < 2) throw ShapeError("window size must be >= 2");
  if (!(pos_tolerance > 0.0) || !(yaw_tolerance > 0.0))
    throw ShapeError("tolerances must be positive");
  if (!(obs_rate_hz > 0.0)) throw ShapeError("observation rate must be positive");
  if (!(cmd_period > 0.0)) throw ShapeError("command period must be positive");
  if (truth_substeps < 1) throw ShapeError("truth substeps must be >= 1");
}

EpisodeStatus run_success_check(EnvVariant variant, const TaskSpec& task,
                                const std::array<double, 3>& pose, int applied_actions,
                                const EpisodeConfig& cfg) {
  bool solved = false;
  if (variant == EnvVariant::kBeltBox) {
    const double yaw_err = std::abs(wrap_angle(pose[2] - task.target_yaw));
    const double drift = std::hypot(pose[0] - task.initial_pose[0],
                                    pose[1] - task.initial_pose[1]);
    solved = yaw_err < cfg.yaw_tolerance && drift < cfg.pos_tolerance;
  } else {
    const double dist = std::hypot(pose[0] - task.goal[0], pose[1] - task.goal[1]);
    solved = dist < cfg.pos_tolerance;
  }
  if (solved) return EpisodeStatus::kSolved;
  if (applied_actions >= cfg.h_max) return EpisodeStatus::kTimeout;
  return EpisodeStatus::kRunning;
}

void write_event_log(std::ostream& os, const std::vector<TimedEvent>& events) {
  for (const TimedEvent& e : events) {
    os << (e.kind == TimedEvent::Kind::kObservation ? "obs" : e.clamped ? "act*" : "act");
    os << ' ' << fmt_double(e.t);
    for (double v : e.payload) os << ' ' << fmt_double(v);
    os << '\n';
  }
}

std::vector<TimedEvent> read_event_log(std::istream& is) {
  std::vector<TimedEvent> events;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind, tok;
    ls >> kind;
    TimedEvent e;
    if (kind == "obs") {
      e.kind = TimedEvent::Kind::kObservation;
    } else if (kind == "act" || kind == "act*") {
      e.kind = TimedEvent::Kind::kAction;
      e.clamped = kind == "act*";
    } else {
      throw Error("unknown event kind: '" + kind + "'");
    }
    ls >> tok;
    e.t = parse_double(tok);
    while (ls >> tok) e.payload.push_back(parse_double(tok));
    events.push_back(std::move(e));
  }
  return events;
}

GroundTruthModel::GroundTruthModel(EnvParams env, SolverSpec solver)
    : env_(std::move(env)), solver_(solver) {
  params_.shape = ModelShape::node(env_.action_dim(), {});
  params_.values.assign(params_.shape.param_count(), 0.0);
}

void GroundTruthModel::set_values(std::vector<double>) {
  throw ShapeError("ground-truth oracle has no trainable parameters");
}

StateEstimate GroundTruthModel::predict(const StateEstimate& z0, double t0,
                                        const ActionSchedule& sched, double dt) const {
  auto field = [&](double, std::span<const double> zz, std::span<const double> uu,
                   std::span<double> dz) {
    const auto d = truth_derivative(env_, {zz[0], zz[1], zz[2]}, uu);
    dz[0] = d[0];
    dz[1] = d[1];
    dz[2] = d[2];
    dz[3] = dz[4] = dz[5] = 0.0;
  };
  const auto zf = z0.flat();
  const auto y = integrate(field, std::span<const double>(zf), t0, t0 + dt, sched, solver_);
  return StateEstimate::from_flat({y[0], y[1], y[2], y[3], y[4], y[5]}).wrapped();
}

std::array<Ad, kStateDim> GroundTruthModel::predict_taped(Tape&, std::span<const Ad>,
                                                          const StateEstimate&, double,
                                                          const ActionSchedule&,
                                                          double) const {
  throw Error("ground-truth oracle is not trainable");
}

}  // namespace acumen
