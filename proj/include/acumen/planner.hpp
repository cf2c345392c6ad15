#pragma once

#include <array>
#include <functional>
#include <variant>
#include <vector>

#include "acumen/env.hpp"
#include "acumen/model.hpp"
#include "acumen/rng.hpp"
#include "acumen/schedule.hpp"
#include "acumen/state.hpp"

namespace acumen {

// H x M candidate action sequence.
using ActionSeq = std::vector<std::vector<double>>;

// Zero-mean unit-variance noise of length n whose power spectral density
// falls off as f^(-beta); beta = 0 is plain i.i.d. Gaussian.
std::vector<double> powerlaw_gaussian(double beta, int n, Rng& rng);

// N_p sequences mu + sigma ⊙ eps with time-correlated eps per action
// dimension, clamped to the symmetric command box.
std::vector<ActionSeq> sample_colored(const ActionSeq& mu, const ActionSeq& sigma,
                                      double beta, int n_population, Rng& rng,
                                      double action_limit);

// Visit counts over a fixed arena grid; positions outside the bounds map to
// the nearest boundary cell.
class OccupancyGrid {
 public:
  OccupancyGrid(std::array<double, 2> x_range, std::array<double, 2> y_range,
                int resolution);
  int cell_index(double x, double y) const;
  void visit(double x, double y) { ++visits_[cell_index(x, y)]; }
  int visits_at(double x, double y) const { return visits_[cell_index(x, y)]; }
  int unique_visited() const;
  int resolution() const { return res_; }

 private:
  std::array<double, 2> x_range_, y_range_;
  int res_;
  std::vector<int> visits_;
};

struct BoxRotationReward {
  double target_yaw = std::numbers::pi / 2;
  std::array<double, 2> initial_pos{0.0, 0.0};
  double threshold = 0.3;       // r_t
  double penalty_weight = 10.0;
};

struct GoalHeadingReward {
  std::array<double, 2> goal{0.0, 0.0};
  double heading_tol_deg = 5.0;
};

struct ExplorationReward {
  const OccupancyGrid* grid = nullptr;  // owned by the episode harness
};

using RewardSpec = std::variant<BoxRotationReward, GoalHeadingReward, ExplorationReward>;

double reward_box(const StateEstimate& z_pred, const BoxRotationReward& spec);
double reward_goal_heading(const StateEstimate& z_before, const StateEstimate& z_after,
                           const GoalHeadingReward& spec);
double reward_exploration(const StateEstimate& z_pred, const ExplorationReward& spec);
double evaluate_reward(const RewardSpec& spec, const StateEstimate& z_before,
                       const StateEstimate& z_after);

enum class PlannerMode { kCem, kRandomShoot };

struct PlannerConfig {
  PlannerMode mode = PlannerMode::kCem;
  int n_population = 20;  // N_p
  int n_elites = 5;       // N_e
  int horizon = 4;        // H
  double noise_beta = 2.0;
  std::vector<double> mu0;     // per-dim initial mean, broadcast over the horizon
  std::vector<double> sigma0;  // per-dim initial std
  int max_iterations = 5;      // convergence criterion: iteration cap ...
  double sigma_floor = 0.0;    // ... and an optional floor on the mean elite std
  bool keep_elites = true;
  // refit uses max(elite std, sigma_smoothing * previous sigma); keeps the
  // search alive when retained elites would collapse the variance early
  double sigma_smoothing = 0.7;
  std::vector<std::vector<double>> discrete_values;  // per-dim sets, random-shoot mode
  double action_limit = 1.0;
  double plan_duration = 0.0;  // Δt over which candidates are spread

  int action_dim() const;
  void validate() const;
};

// Builds the history+candidate schedule (candidate knots at H regular
// intervals over [t0, t0+dt]), propagates the model and evaluates the
// reward at the terminal predicted state. Propagation failures score -inf.
double score_sequence(const DynamicsModel& model, const StateEstimate& z0, double t0,
                      const ActionSchedule& history, const ActionSeq& candidate,
                      double dt, const RewardSpec& reward);

struct CemResult {
  ActionSeq best;
  double best_score = 0.0;
  int iterations = 0;
};

// CEM core over an arbitrary scorer, for oracle tests and reuse.
CemResult cem_optimize(const PlannerConfig& cfg,
                       const std::function<double(const ActionSeq&)>& scorer, Rng& rng);

CemResult cem_select(const DynamicsModel& model, const StateEstimate& z0, double t0,
                     const ActionSchedule& history, const PlannerConfig& cfg,
                     const RewardSpec& reward, Rng& rng);

struct ShootResult {
  std::vector<double> action;
  double score = 0.0;
  int n_candidates = 0;
};

// Uniform sampling over the discrete product set (exhaustive when the set
// fits into N_p). Ties break toward the smallest action norm, then
// lexicographic order.
ShootResult shoot_select(const DynamicsModel& model, const StateEstimate& z0, double t0,
                         const ActionSchedule& history, const PlannerConfig& cfg,
                         const RewardSpec& reward, Rng& rng);

// Mode dispatch; random shooting yields a length-1 sequence.
ActionSeq select_command(const DynamicsModel& model, const StateEstimate& z0, double t0,
                         const ActionSchedule& history, const PlannerConfig& cfg,
                         const RewardSpec& reward, Rng& rng);

}  // namespace acumen
