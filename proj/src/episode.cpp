#include "acumen/episode.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>

#include "acumen/errors.hpp"

namespace acumen {

namespace {

double pair_coin(std::uint64_t salt, double t_start, double t_end) {
  std::uint64_t h = mix64(salt);
  h = mix64(h ^ std::bit_cast<std::uint64_t>(t_start));
  h = mix64(h ^ std::bit_cast<std::uint64_t>(t_end));
  return unit_from_bits(h);
}

StateEstimate pair_start_estimate(const TimedEvent* prev, const TimedEvent& a,
                                  const TimedEvent& b) {
  if (prev != nullptr) return xi_estimate(*prev, a);
  // episode start: no earlier observation, so the velocity falls back to the
  // pair's own finite difference anchored at the first pose
  StateEstimate z = xi_estimate(a, b);
  z.pose = {a.payload[0], a.payload[1], wrap_angle(a.payload[2])};
  return z;
}

}  // namespace

SampleSplitResult sample_split(std::span<const TimedEvent> window_obs,
                               const ActionSchedule& applied, double r_split,
                               std::uint64_t split_salt, const TimedEvent* preceding_obs) {
  if (!(r_split > 0.0) || !(r_split < 1.0))
    throw ShapeError("split ratio must be in (0,1)");
  SampleSplitResult out;
  if (window_obs.size() < 2) return out;

  for (std::size_t k = 0; k + 1 < window_obs.size(); ++k) {
    const TimedEvent& a = window_obs[k];
    const TimedEvent& b = window_obs[k + 1];
    const TimedEvent* prev = k > 0 ? &window_obs[k - 1] : preceding_obs;

    TrainingExample ex;
    ex.t_start = a.t;
    ex.t_end = b.t;
    ex.z_start = pair_start_estimate(prev, a, b);
    const StateEstimate z_end = xi_estimate(a, b);
    ex.target_delta = {b.payload[0] - a.payload[0],
                       b.payload[1] - a.payload[1],
                       wrap_angle(b.payload[2] - a.payload[2]),
                       z_end.vel[0] - ex.z_start.vel[0],
                       z_end.vel[1] - ex.z_start.vel[1],
                       z_end.vel[2] - ex.z_start.vel[2]};
    ex.schedule = applied.empty() ? ActionSchedule{} : applied.slice(ex.t_start, ex.t_end);

    if (pair_coin(split_salt, ex.t_start, ex.t_end) < r_split)
      out.train.push_back(std::move(ex));
    else
      out.val.push_back(std::move(ex));
  }
  return out;
}

bool EpisodeBuffer::seen(double t_start, double t_end) {
  const std::pair<double, double> key{t_start, t_end};
  if (std::find(intervals_.begin(), intervals_.end(), key) != intervals_.end()) return true;
  intervals_.push_back(key);
  return false;
}

void EpisodeBuffer::add(SampleSplitResult batch) {
  for (TrainingExample& ex : batch.train)
    if (!seen(ex.t_start, ex.t_end)) train_.push_back(std::move(ex));
  for (TrainingExample& ex : batch.val)
    if (!seen(ex.t_start, ex.t_end)) val_.push_back(std::move(ex));
}

RewardSpec make_task_reward(const EpisodeSetup& setup) {
  if (setup.exploration_grid != nullptr)
    return ExplorationReward{setup.exploration_grid};
  if (setup.env.variant == EnvVariant::kBeltBox)
    return BoxRotationReward{setup.task.target_yaw,
                             {setup.task.initial_pose[0], setup.task.initial_pose[1]},
                             0.3,
                             10.0};
  return GoalHeadingReward{setup.task.goal, 5.0};
}

namespace {

// Ground truth plus the event machinery: zero-order-hold actuator, nominal
// observations pushed through the thinner, pending jittered applications.
class EpisodeSim {
 public:
  explicit EpisodeSim(const EpisodeSetup& s)
      : setup_(s),
        thinner_(s.irregularity, Rng::derive(s.seed, {0x0b5ULL})),
        jitter_rng_(Rng::derive(s.seed, {0xac7ULL})),
        obs_period_(1.0 / s.episode.obs_rate_hz),
        current_u_(2, 0.0) {
    truth_pose_ = s.task.initial_pose;
    emit_nominal();  // t = 0
    next_obs_t_ = obs_period_;
  }

  double now() const { return t_now_; }
  bool solved() const { return solved_; }
  int applied_count() const { return applied_count_; }
  const std::array<double, 3>& pose() const { return truth_pose_; }
  const std::vector<TimedEvent>& observations() const { return observations_; }
  const ActionSchedule& applied() const { return applied_; }
  std::vector<TimedEvent> take_events() { return std::move(events_); }
  std::vector<std::array<double, 2>> take_path() { return std::move(truth_path_); }

  void advance_to(double t_target) {
    while (!solved_) {
      const double inf = std::numeric_limits<double>::infinity();
      const double t_act = pending_.empty() ? inf : pending_.front().t;
      const double t_next = std::min({t_act, next_obs_t_, t_target});
      integrate_truth(t_next);
      t_now_ = t_next;
      if (t_act <= next_obs_t_ && t_act <= t_target && !pending_.empty() &&
          pending_.front().t == t_next) {
        apply_front();
      } else if (next_obs_t_ <= t_target && next_obs_t_ == t_next) {
        emit_nominal();
        next_obs_t_ += obs_period_;
      } else {
        break;
      }
    }
  }

  // Execute the first K knots of the planned sequence at the command
  // period (the planner may have scored them over a longer lookahead),
  // re-stamped at random offsets within their interval, with values
  // interpolated from the planned knots; then run the world to the end of
  // the applied block.
  void apply_plan(const ActionSeq& seq, double t_plan, int k_apply, double spacing) {
    ActionSchedule planned;
    if (!applied_.empty()) {
      const std::size_t last = applied_.size() - 1;
      planned.append(applied_.times()[last], applied_.action_at(last));
    }
    for (std::size_t k = 0; k < seq.size(); ++k)
      planned.append(t_plan + spacing * static_cast<double>(k), seq[k]);

    const bool jitter = setup_.irregularity.action_time_jitter;
    double t_prev = applied_.empty() ? -1.0 : applied_.times().back();
    for (int k = 0; k < k_apply; ++k) {
      double t_k = t_plan + spacing * k;
      std::vector<double> value = seq[static_cast<std::size_t>(k)];
      if (jitter) {
        const double u = jitter_rng_.uniform();
        t_k += spacing * u;
        value = planned.value(t_k);
      }
      if (t_prev >= 0.0) t_k = std::max(t_k, t_prev + 1e-9);  // keep applications ordered
      t_prev = t_k;
      pending_.push_back({t_k, std::move(value)});
    }
    advance_to(t_plan + spacing * k_apply);
    pending_.clear();  // success may leave unapplied commands behind
  }

 private:
  struct Pending {
    double t;
    std::vector<double> u;
  };

  void integrate_truth(double t_to) {
    if (!(t_to > t_now_)) return;
    const double h_micro =
        setup_.episode.cmd_period / static_cast<double>(setup_.episode.truth_substeps);
    const int n = std::max(1, static_cast<int>(std::ceil((t_to - t_now_) / h_micro)));
    const double h = (t_to - t_now_) / n;
    for (int i = 0; i < n; ++i)
      truth_pose_ = step_truth(setup_.env, truth_pose_, current_u_, h);
  }

  void apply_front() {
    Pending p = std::move(pending_.front());
    pending_.pop_front();
    const double lim = setup_.env.action_limit();
    bool clamped = false;
    for (double& v : p.u) {
      const double c = std::clamp(v, -lim, lim);
      clamped |= c != v;
      v = c;
    }
    current_u_ = p.u;
    applied_.append(p.t, p.u);
    ++applied_count_;
    TimedEvent e;
    e.kind = TimedEvent::Kind::kAction;
    e.t = p.t;
    e.payload = p.u;
    e.clamped = clamped;
    events_.push_back(std::move(e));
    check_success();
  }

  void emit_nominal() {
    truth_path_.push_back({truth_pose_[0], truth_pose_[1]});
    if (setup_.exploration_grid != nullptr)
      setup_.exploration_grid->visit(truth_pose_[0], truth_pose_[1]);
    TimedEvent e;
    e.kind = TimedEvent::Kind::kObservation;
    e.t = t_now_;
    e.payload = {truth_pose_[0], truth_pose_[1], truth_pose_[2]};
    if (auto kept = thinner_.push(std::move(e))) {
      observations_.push_back(*kept);
      events_.push_back(std::move(*kept));
    }
    check_success();
  }

  void check_success() {
    if (run_success_check(setup_.env.variant, setup_.task, truth_pose_, applied_count_,
                          setup_.episode) == EpisodeStatus::kSolved)
      solved_ = true;
  }

  const EpisodeSetup& setup_;
  ObservationThinner thinner_;
  Rng jitter_rng_;
  double obs_period_;
  std::vector<double> current_u_;
  std::array<double, 3> truth_pose_{};
  double t_now_ = 0.0;
  double next_obs_t_ = 0.0;
  bool solved_ = false;
  int applied_count_ = 0;
  std::deque<Pending> pending_;
  ActionSchedule applied_;
  std::vector<TimedEvent> observations_;
  std::vector<TimedEvent> events_;
  std::vector<std::array<double, 2>> truth_path_;
};

}  // namespace

EpisodeReport run_episode(const DynamicsModel& model_start, const EpisodeSetup& setup_in) {
  EpisodeSetup setup = setup_in;
  setup.episode.validate();
  setup.irregularity.validate();
  setup.train.validate();
  if (setup.planner.plan_duration <= 0.0)
    setup.planner.plan_duration = setup.episode.apply_horizon * setup.episode.cmd_period;
  setup.planner.action_limit = setup.env.action_limit();
  if (setup.planner.mode == PlannerMode::kRandomShoot) setup.planner.horizon = 1;
  if (setup.episode.apply_horizon > setup.planner.horizon)
    throw ShapeError("apply horizon exceeds the planned horizon");

  std::unique_ptr<DynamicsModel> model = model_start.clone();
  const RewardSpec reward = make_task_reward(setup);

  Rng salt_rng = Rng::derive(setup.seed, {0x5a17ULL});
  const std::uint64_t split_salt = salt_rng.next_u64();
  Rng plan_rng = Rng::derive(setup.seed, {0x97a9ULL});
  Rng train_rng = Rng::derive(setup.seed, {0x7a19ULL});
  Rng random_rng = Rng::derive(setup.seed, {0x4a4dULL});

  EpisodeSim sim(setup);
  EpisodeBuffer buffer;
  EpisodeReport report;
  report.env = setup.env;

  const double spacing = setup.episode.cmd_period;
  const double obs_period = 1.0 / setup.episode.obs_rate_hz;
  const int max_iters = 4 * setup.episode.h_max + 256;
  const int action_dim = 2;

  int cycles = 0;
  int liveness = 0;
  EpisodeStatus status = EpisodeStatus::kRunning;
  while (true) {
    status = sim.solved() ? EpisodeStatus::kSolved
                          : run_success_check(setup.env.variant, setup.task, sim.pose(),
                                              sim.applied_count(), setup.episode);
    if (status != EpisodeStatus::kRunning) break;
    if (++liveness > max_iters) {
      status = EpisodeStatus::kTimeout;
      report.diagnostic = "liveness cap reached";
      break;
    }
    if (sim.observations().size() < 2) {
      sim.advance_to(sim.now() + obs_period);
      continue;
    }

    const auto& obs = sim.observations();
    const std::size_t wn = std::min<std::size_t>(setup.episode.window_size, obs.size());
    // copies: the observation vector grows while the plan is applied
    const std::vector<TimedEvent> window(obs.end() - static_cast<std::ptrdiff_t>(wn),
                                         obs.end());
    std::optional<TimedEvent> preceding;
    if (obs.size() > wn) preceding = obs[obs.size() - wn - 1];
    const double t0 = sim.now();
    const ActionSchedule history =
        sim.applied().empty() ? ActionSchedule{}
                              : sim.applied().slice(window.front().t, t0);
    const StateEstimate z_hat = xi_estimate(obs[obs.size() - 2], obs[obs.size() - 1]);

    ActionSeq seq;
    if (setup.random_actions) {
      const double lim = setup.env.action_limit();
      seq.assign(static_cast<std::size_t>(setup.planner.horizon),
                 std::vector<double>(action_dim));
      for (auto& a : seq)
        for (double& v : a) v = random_rng.uniform(-lim, lim);
    } else {
      try {
        seq = select_command(*model, z_hat, t0, history, setup.planner, reward, plan_rng);
      } catch (const Error& e) {
        status = EpisodeStatus::kTimeout;
        report.diagnostic = e.what();
        break;
      }
      PlanRecord rec;
      rec.t = t0;
      if (setup.planner.mode == PlannerMode::kCem) {
        rec.candidates = setup.planner.n_population;
      } else {
        std::size_t total = 1;
        for (const auto& vals : setup.planner.discrete_values) total *= vals.size();
        rec.candidates = static_cast<int>(
            std::min<std::size_t>(total, static_cast<std::size_t>(setup.planner.n_population)));
      }
      rec.best_score = score_sequence(*model, z_hat, t0, history, seq,
                                      setup.planner.plan_duration, reward);
      rec.chosen = seq.front();
      report.plans.push_back(std::move(rec));
    }

    sim.apply_plan(seq, t0, setup.episode.apply_horizon, spacing);

    buffer.add(sample_split(window, sim.applied(), setup.r_split, split_salt,
                            preceding ? &*preceding : nullptr));

    ++cycles;
    if (setup.adapt_online && cycles % setup.train.train_freq == 0 &&
        !buffer.train().empty()) {
      try {
        fit_model(*model, buffer.train(), setup.train, train_rng);
      } catch (const Error& e) {
        status = EpisodeStatus::kTimeout;
        report.diagnostic = e.what();
        break;
      }
    }
  }

  report.outcome = status;
  report.applied_actions = sim.applied_count();
  report.cycles = cycles;
  report.theta_final = model->params().values;
  report.n_train = buffer.train().size();
  report.n_val = buffer.val().size();
  report.val_empty = buffer.val().empty();
  if (!report.val_empty)
    report.val_loss = training_loss(*model, buffer.val(), setup.train.w_l);
  report.events = sim.take_events();
  report.truth_path = sim.take_path();
  if (setup.keep_dataset) {
    report.collected_train.assign(buffer.train().begin(), buffer.train().end());
    report.collected_val.assign(buffer.val().begin(), buffer.val().end());
  }
  return report;
}

}  // namespace acumen
