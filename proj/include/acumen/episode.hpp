#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acumen/env.hpp"
#include "acumen/model.hpp"
#include "acumen/planner.hpp"
#include "acumen/train.hpp"

namespace acumen {

struct SampleSplitResult {
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> val;
};

// Consecutive observation pairs from the window become examples whose
// covering action sub-schedule is cut from the applied history. Assignment
// to train/validation is a stateless coin keyed on (salt, t_i, t_j), so a
// pair keeps its side when windows overlap across cycles.
SampleSplitResult sample_split(std::span<const TimedEvent> window_obs,
                               const ActionSchedule& applied, double r_split,
                               std::uint64_t split_salt,
                               const TimedEvent* preceding_obs = nullptr);

// Accumulated split examples; duplicate intervals are kept once.
class EpisodeBuffer {
 public:
  void add(SampleSplitResult batch);
  std::span<const TrainingExample> train() const { return train_; }
  std::span<const TrainingExample> val() const { return val_; }

 private:
  bool seen(double t_start, double t_end);
  std::vector<TrainingExample> train_, val_;
  std::vector<std::pair<double, double>> intervals_;
};

struct PlanRecord {
  double t = 0.0;
  int candidates = 0;
  double best_score = 0.0;
  std::vector<double> chosen;
};

struct EpisodeSetup {
  EnvParams env;
  TaskSpec task;
  EpisodeConfig episode;
  IrregularityConfig irregularity;
  PlannerConfig planner;
  TrainConfig train;
  double r_split = 0.75;
  std::uint64_t seed = 0;
  bool adapt_online = true;               // run the inner-loop fits
  OccupancyGrid* exploration_grid = nullptr;  // non-null switches to the exploration reward
  bool random_actions = false;            // bypass the planner (exploration baseline / data collection)
  bool keep_dataset = false;              // copy the gathered examples into the report
};

struct EpisodeReport {
  EnvParams env;
  EpisodeStatus outcome = EpisodeStatus::kTimeout;
  int applied_actions = 0;
  int cycles = 0;
  std::vector<double> theta_final;
  double val_loss = 0.0;
  bool val_empty = true;
  std::size_t n_train = 0, n_val = 0;
  std::vector<TimedEvent> events;                    // kept observations + applied actions
  std::vector<std::array<double, 2>> truth_path;     // true positions at the nominal rate
  std::vector<PlanRecord> plans;
  std::vector<TrainingExample> collected_train, collected_val;  // when keep_dataset is set
  std::string diagnostic;  // set when the episode aborted on a planner/solver error
};

RewardSpec make_task_reward(const EpisodeSetup& setup);

// One model-predictive episode: sliding-window state estimation, planning,
// jittered application of the first K commands, data accumulation and
// periodic inner-loop refinement, until success or the action budget runs
// out. Planner or solver failures abort the episode as a timeout with a
// diagnostic.
EpisodeReport run_episode(const DynamicsModel& model_start, const EpisodeSetup& setup);

}  // namespace acumen
