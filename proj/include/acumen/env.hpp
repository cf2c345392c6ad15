#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "acumen/model.hpp"
#include "acumen/rng.hpp"
#include "acumen/state.hpp"

namespace acumen {

// Timestamped observation (pose) or applied action; the universal currency
// of the asynchronous world.
struct TimedEvent {
  enum class Kind { kObservation, kAction };
  Kind kind = Kind::kObservation;
  double t = 0.0;
  std::vector<double> payload;  // pose 3-vector or action M-vector
  bool clamped = false;         // action was clamped into the command box
};

enum class EnvVariant { kUnicycleWind, kBeltBox };

// Hidden per-episode dynamics sample.
struct EnvParams {
  EnvVariant variant = EnvVariant::kUnicycleWind;
  // unicycle-wind
  int wind_index = 0;  // n in [0, n_d)
  int n_directions = 32;
  double wind_magnitude = 0.0;
  // belt-box surrogate coefficients
  double kappa_m = 0.65;  // forward gain, [0.3, 1.0]
  double kappa_r = 1.25;  // rotation gain, [0.5, 2.0]
  double kappa_s = 0.0;   // lateral slip gain, [-0.2, 0.2]

  double wind_angle() const;
  std::array<double, 2> wind_vector() const;
  int action_dim() const { return 2; }
  double action_limit() const { return variant == EnvVariant::kUnicycleWind ? 0.22 : 1.0; }
};

inline constexpr std::array<double, 4> kWindMagnitudes = {0.1, 0.2, 0.4, 0.5};

enum class EnvSplit { kTrain, kTest };

// unicycle-wind: even direction indices for train, odd for test, uniform
// magnitude from the fixed set. belt-box: uniform coefficient boxes with
// the split only selecting the RNG stream.
EnvParams sample_env(EnvSplit split, EnvVariant variant, Rng& rng, int n_directions = 32);

// Time derivative of the true pose under command u.
std::array<double, 3> truth_derivative(const EnvParams& env, const std::array<double, 3>& z,
                                       std::span<const double> u);

// One RK4 step of the ground-truth kinematics at step size dt. Commands
// outside the box are clamped; `clamped` reports it when non-null.
std::array<double, 3> step_truth(const EnvParams& env, const std::array<double, 3>& z,
                                 std::span<const double> u, double dt,
                                 bool* clamped = nullptr);

struct IrregularityConfig {
  int k_s = 1;           // keep one of k_s successive observations
  double eta = 0.0;      // drop probability applied after subsampling
  double p_drop = 0.0;   // additional drop probability (turtlebot-style)
  bool action_time_jitter = false;

  void validate() const;
};

// Batch form of the observation thinning: per block of k_s nominal
// observations exactly one survives (uniform choice), then survivors are
// independently dropped with probability eta and then p_drop.
std::vector<TimedEvent> emit_observations(const std::vector<TimedEvent>& nominal,
                                          const IrregularityConfig& cfg, Rng rng);

// Streaming counterpart used by the live simulation; draws match the batch
// form given the same RNG stream.
class ObservationThinner {
 public:
  ObservationThinner(const IrregularityConfig& cfg, Rng rng);
  // Feed one nominal observation; returns it if it survives.
  std::optional<TimedEvent> push(TimedEvent obs);

 private:
  IrregularityConfig cfg_;
  Rng rng_;
  int block_pos_ = 0;
  int survivor_ = 0;
};

// Pose + finite-difference velocity from the two freshest observations.
// The yaw difference is wrapped before division.
StateEstimate xi_estimate(const TimedEvent& prev, const TimedEvent& cur);

// Task goal data used by the success check and rewards.
struct TaskSpec {
  std::array<double, 2> goal{1.5, 0.0};      // unicycle target position
  double target_yaw = std::numbers::pi / 2;  // belt-box target rotation
  std::array<double, 3> initial_pose{0.0, 0.0, 0.0};
};

struct EpisodeConfig {
  int h_max = 300;          // max applied actions
  int apply_horizon = 1;    // K, actions applied per planning cycle
  int window_size = 4;      // M
  double pos_tolerance = 0.1;
  double yaw_tolerance = 0.1;
  double obs_rate_hz = 6.0;
  double cmd_period = 0.2;  // nominal spacing of planned commands [s]
  int truth_substeps = 4;   // ground-truth micro-steps per command period
  std::uint64_t seed = 0;

  void validate() const;
};

enum class EpisodeStatus { kSolved, kRunning, kTimeout };

EpisodeStatus run_success_check(EnvVariant variant, const TaskSpec& task,
                                const std::array<double, 3>& pose, int applied_actions,
                                const EpisodeConfig& cfg);

// Line-delimited event-log export; doubles round-trip exactly.
void write_event_log(std::ostream& os, const std::vector<TimedEvent>& events);
std::vector<TimedEvent> read_event_log(std::istream& is);

// Oracle predictor: the true unicycle field used as if it were a learned
// model (velocity components are carried but not modelled).
class GroundTruthModel final : public DynamicsModel {
 public:
  explicit GroundTruthModel(EnvParams env, SolverSpec solver = SolverSpec::rk4(8));
  const ModelParams& params() const override { return params_; }
  void set_values(std::vector<double>) override;
  StateEstimate predict(const StateEstimate& z0, double t0, const ActionSchedule& sched,
                        double dt) const override;
  std::array<Ad, kStateDim> predict_taped(Tape&, std::span<const Ad>, const StateEstimate&,
                                          double, const ActionSchedule&,
                                          double) const override;
  std::unique_ptr<DynamicsModel> clone() const override {
    return std::make_unique<GroundTruthModel>(*this);
  }

 private:
  EnvParams env_;
  SolverSpec solver_;
  ModelParams params_;  // empty; present to satisfy the interface
};

}  // namespace acumen
