#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "acumen/episode.hpp"

namespace acumen {

struct MetaConfig {
  int n_envs = 8;        // episodes per meta-iteration
  double alpha = 5e-4;   // meta learning rate
  double sigma = 1e-2;   // prior perturbation std
  double r_split = 0.75;
  int meta_iterations = 15;
  int m_test = 20;       // held-out evaluation episodes
  int eval_every = 1;    // 0 = final evaluation only
  bool antithetic = false;
  std::uint64_t seed = 0;
  int parallel = 1;

  void validate() const;
};

struct MetaUpdateInput {
  double val_loss = 0.0;
  bool val_empty = false;
  std::vector<double> epsilon;
};

struct MetaUpdateResult {
  std::vector<double> theta;
  bool skipped = false;      // every validation set was empty
  int n_substituted = 0;     // empty-validation episodes given the mean loss
};

// theta' = theta - alpha/(N sigma) * sum_i L_i eps_i. Episodes with an
// empty validation set contribute the mean loss of the non-empty ones.
MetaUpdateResult meta_update(const std::vector<double>& theta,
                             std::span<const MetaUpdateInput> inputs, double alpha,
                             double sigma);

struct MetaIterationMetrics {
  int iteration = 0;
  double solved_pct = 0.0;
  double mean_steps_all = 0.0;
  double std_steps_all = 0.0;
  double mean_steps_solved = 0.0;  // 0 when nothing was solved
  double std_steps_solved = 0.0;
  int n_solved = 0;
  int n_episodes = 0;
  bool has_test = false;
  double test_solved_pct = 0.0;
};

struct MetaTrainResult {
  std::vector<double> theta_last;
  std::vector<double> theta_best;  // best held-out solved percentage
  int best_iteration = -1;
  double best_test_pct = -1.0;
  std::vector<MetaIterationMetrics> metrics;
};

// Base experiment description shared by all episodes of a run.
struct MetaSetup {
  EnvVariant variant = EnvVariant::kUnicycleWind;
  int n_directions = 32;
  TaskSpec base_task;
  bool randomize_goal_direction = true;  // unicycle goal on a circle of the base radius
  double goal_cone_rad = std::numbers::pi;  // directions within +-cone of the base bearing
  double initial_pose_noise = 0.0;       // belt-box start jitter
  EpisodeConfig episode;
  IrregularityConfig irregularity;
  PlannerConfig planner;
  TrainConfig train;
  MetaConfig meta;
};

TaskSpec sample_task(const MetaSetup& setup, Rng& rng);

// The outer loop: per iteration, run n_envs episodes from Gaussian
// perturbations of the prior, apply the zero-order meta-update, and
// periodically evaluate the unperturbed prior on held-out environments.
MetaTrainResult meta_train(const DynamicsModel& prototype, const MetaSetup& setup);

// Held-out evaluation of a fixed prior: n episodes on the given split with
// per-episode adaptation; returns the reports.
std::vector<EpisodeReport> evaluate_prior(const DynamicsModel& prototype,
                                          const std::vector<double>& theta,
                                          const MetaSetup& setup, EnvSplit split, int n,
                                          std::uint64_t eval_seed);

}  // namespace acumen
