#pragma once

#include <array>
#include <span>
#include <vector>

#include "acumen/model.hpp"
#include "acumen/rng.hpp"
#include "acumen/schedule.hpp"
#include "acumen/state.hpp"

namespace acumen {

// One supervised pair: propagate from z_start across the covering schedule
// and compare the predicted state change against the observed one.
struct TrainingExample {
  StateEstimate z_start;
  double t_start = 0.0;
  double t_end = 0.0;
  std::array<double, kStateDim> target_delta{};  // observed change, yaw difference wrapped
  ActionSchedule schedule;
};

// Mean over the dataset of (E_trans + w_l * E_rot)^2, where E_trans is the
// Euclidean norm of the error in predicted planar translation change and
// E_rot = ||R^T R_hat - I||_F built from the yaw angles.
double training_loss(const DynamicsModel& model, std::span<const TrainingExample> dataset,
                     double w_l);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

// Same loss recorded on a tape; the gradient is exact for the discretized
// computation. Throws GradientOverflowError on non-finite entries.
LossGradient training_loss_gradient(const DynamicsModel& model,
                                    std::span<const TrainingExample> dataset, double w_l);

struct TrainConfig {
  double learning_rate = 5e-4;
  double lr_decay = 0.9;  // per optimizer step
  double w_l = 10.0;
  int n_iterations = 10;  // inner budget per fit call
  int batch_size = 0;     // 0 = full batch
  int train_freq = 5;     // planning cycles between fit calls during an episode

  void validate() const;
};

struct FitResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps_skipped = 0;
  bool reverted = false;
};

// Adam steps on training_loss with per-step learning-rate decay. The model
// never ends up worse than it started on the given dataset: if the final
// full-dataset loss exceeds the initial one the parameters are restored.
FitResult fit_model(DynamicsModel& model, std::span<const TrainingExample> dataset,
                    const TrainConfig& cfg, Rng& rng);

}  // namespace acumen
