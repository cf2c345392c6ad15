#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "acumen/ode.hpp"
#include "acumen/rng.hpp"
#include "acumen/schedule.hpp"
#include "acumen/state.hpp"
#include "acumen/tape.hpp"

namespace acumen {

inline constexpr int kStateDim = 6;

enum class ModelKind { kNode, kRnn };
enum class Activation { kTanh };

// Layer-shape descriptor for either model family. For the N-ODE MLP the
// input is (t, u(t), z); for the stacked RNN it is one (action, dt) tuple
// and every hidden layer additionally carries a recurrent matrix.
struct ModelShape {
  ModelKind kind = ModelKind::kNode;
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = kStateDim;
  Activation activation = Activation::kTanh;

  std::size_t param_count() const;
  static ModelShape node(int action_dim, std::vector<int> hidden);
  static ModelShape rnn(int action_dim, std::vector<int> hidden);
};

// Flat parameter vector with its shape metadata. Layout is per layer
// [W row-major, (U row-major for RNN), b], then the linear output layer.
struct ModelParams {
  ModelShape shape;
  std::vector<double> values;

  void validate() const;
};

ModelParams init_params(const ModelShape& shape, Rng& rng);

// Smallest hidden width for a 5-layer stacked RNN whose parameter count is
// closest to `target_params`.
int rnn_width_for(std::size_t target_params, int action_dim, int layers = 5);

// MLP time-derivative of the 6-D state; input vector is (t, u(t), z).
// Throws ShapeError on dimension mismatch.
std::array<double, kStateDim> node_derivative(const ModelParams& params, double t,
                                              std::span<const double> u,
                                              const StateEstimate& z);

// A dynamics model that can propagate a state estimate across an action
// schedule, in plain doubles for planning and on a tape for training.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;
  virtual const ModelParams& params() const = 0;
  virtual void set_values(std::vector<double> values) = 0;
  virtual StateEstimate predict(const StateEstimate& z0, double t0,
                                const ActionSchedule& sched, double dt) const = 0;
  virtual std::array<Ad, kStateDim> predict_taped(Tape& tape, std::span<const Ad> theta,
                                                  const StateEstimate& z0, double t0,
                                                  const ActionSchedule& sched,
                                                  double dt) const = 0;
  virtual std::unique_ptr<DynamicsModel> clone() const = 0;
};

// Neural-ODE model: MLP vector field integrated by the configured solver.
// The time fed to the MLP is measured from the propagation start, which
// keeps the input bounded over long sessions.
class NodeModel final : public DynamicsModel {
 public:
  NodeModel(ModelParams params, SolverSpec solver);

  const ModelParams& params() const override { return params_; }
  void set_values(std::vector<double> values) override;
  const SolverSpec& solver() const { return solver_; }

  StateEstimate predict(const StateEstimate& z0, double t0, const ActionSchedule& sched,
                        double dt) const override;
  std::array<Ad, kStateDim> predict_taped(Tape& tape, std::span<const Ad> theta,
                                          const StateEstimate& z0, double t0,
                                          const ActionSchedule& sched,
                                          double dt) const override;
  std::unique_ptr<DynamicsModel> clone() const override {
    return std::make_unique<NodeModel>(*this);
  }

 private:
  ModelParams params_;
  SolverSpec solver_;
};

// Stacked-RNN ablation baseline over (action, dt) tuples.
class RnnModel final : public DynamicsModel {
 public:
  explicit RnnModel(ModelParams params);

  const ModelParams& params() const override { return params_; }
  void set_values(std::vector<double> values) override;

  StateEstimate predict(const StateEstimate& z0, double t0, const ActionSchedule& sched,
                        double dt) const override;
  std::array<Ad, kStateDim> predict_taped(Tape& tape, std::span<const Ad> theta,
                                          const StateEstimate& z0, double t0,
                                          const ActionSchedule& sched,
                                          double dt) const override;
  std::unique_ptr<DynamicsModel> clone() const override {
    return std::make_unique<RnnModel>(*this);
  }

  // Rollout over explicit (action, dt) tuples; the predicted state change is
  // added onto z0.
  static StateEstimate rollout(const ModelParams& params, const StateEstimate& z0,
                               std::span<const std::pair<std::vector<double>, double>> tuples);

 private:
  ModelParams params_;
};

// Schedule knots reduced to (action, dt) tuples covering [t0, t1].
std::vector<std::pair<std::vector<double>, double>> schedule_to_tuples(
    const ActionSchedule& sched, double t0, double t1);

inline StateEstimate rnn_predict(
    const ModelParams& params, const StateEstimate& z0,
    std::span<const std::pair<std::vector<double>, double>> tuples) {
  return RnnModel::rollout(params, z0, tuples);
}

}  // namespace acumen
