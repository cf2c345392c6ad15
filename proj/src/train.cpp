#include "acumen/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "acumen/errors.hpp"
#include "acumen/tape.hpp"

namespace acumen {

namespace {

double example_error(const DynamicsModel& model, const TrainingExample& ex, double w_l) {
  const StateEstimate pred =
      model.predict(ex.z_start, ex.t_start, ex.schedule, ex.t_end - ex.t_start);
  const double dx = (pred.pose[0] - ex.z_start.pose[0]) - ex.target_delta[0];
  const double dy = (pred.pose[1] - ex.z_start.pose[1]) - ex.target_delta[1];
  const double e_trans = std::sqrt(dx * dx + dy * dy);
  const double dyaw = (pred.pose[2] - ex.z_start.pose[2]) - ex.target_delta[2];
  const double e_rot = std::sqrt(4.0 * (1.0 - std::cos(dyaw)));
  const double e = e_trans + w_l * e_rot;
  return e * e;
}

}  // namespace

double training_loss(const DynamicsModel& model, std::span<const TrainingExample> dataset,
                     double w_l) {
  if (dataset.empty()) throw EmptyDatasetError();
  double sum = 0.0;
  for (const TrainingExample& ex : dataset) sum += example_error(model, ex, w_l);
  return sum / static_cast<double>(dataset.size());
}

LossGradient training_loss_gradient(const DynamicsModel& model,
                                    std::span<const TrainingExample> dataset, double w_l) {
  if (dataset.empty()) throw EmptyDatasetError();
  const std::vector<double>& values = model.params().values;

  static thread_local Tape tape;  // keeps its node capacity across fit steps
  tape.reset();
  std::vector<Ad> theta(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) theta[i] = make_leaf(tape, values[i]);

  Ad total = make_const(tape, 0.0);
  for (const TrainingExample& ex : dataset) {
    const auto pred =
        model.predict_taped(tape, theta, ex.z_start, ex.t_start, ex.schedule,
                            ex.t_end - ex.t_start);
    Ad dx = (pred[0] - ex.z_start.pose[0]) - ex.target_delta[0];
    Ad dy = (pred[1] - ex.z_start.pose[1]) - ex.target_delta[1];
    Ad e_trans = ad_sqrt(dx * dx + dy * dy);
    Ad dyaw = (pred[2] - ex.z_start.pose[2]) - ex.target_delta[2];
    Ad e_rot = ad_sqrt((1.0 - ad_cos(dyaw)) * 4.0);
    Ad e = e_trans + e_rot * w_l;
    total += e * e;
  }
  total = total * (1.0 / static_cast<double>(dataset.size()));

  LossGradient out;
  out.loss = total.val;
  // a non-finite loss is reported back so the caller can skip the step;
  // only a finite loss with a non-finite gradient is an error
  if (std::isfinite(out.loss)) out.grad = tape.gradient(total.idx, values.size());
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ShapeError("learning rate must be >= 0");
  if (!(lr_decay > 0.0) || lr_decay > 1.0) throw ShapeError("lr decay must be in (0,1]");
  if (w_l < 0.0) throw ShapeError("rotation weight must be >= 0");
  if (n_iterations < 1) throw ShapeError("inner budget must be >= 1");
  if (batch_size < 0) throw ShapeError("batch size must be >= 0");
  if (train_freq < 1) throw ShapeError("train cadence must be >= 1");
}

FitResult fit_model(DynamicsModel& model, std::span<const TrainingExample> dataset,
                    const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (dataset.empty()) throw EmptyDatasetError();

  const std::vector<double> start_values = model.params().values;
  FitResult res;
  res.initial_loss = training_loss(model, dataset, cfg.w_l);

  const std::size_t n_params = start_values.size();
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch =
      cfg.batch_size == 0 ? dataset.size()
                          : std::min<std::size_t>(cfg.batch_size, dataset.size());

  std::vector<TrainingExample> scratch;
  int adam_t = 0;
  for (int step = 0; step < cfg.n_iterations; ++step) {
    std::span<const TrainingExample> view = dataset;
    if (batch < dataset.size()) {
      for (std::size_t k = 0; k < batch; ++k) {
        const std::size_t j = k + rng.uniform_int(static_cast<int>(order.size() - k));
        std::swap(order[k], order[j]);
      }
      scratch.clear();
      for (std::size_t k = 0; k < batch; ++k) scratch.push_back(dataset[order[k]]);
      view = scratch;
    }

    const LossGradient lg = training_loss_gradient(model, view, cfg.w_l);
    if (!std::isfinite(lg.loss)) {
      ++res.steps_skipped;
      continue;
    }

    ++adam_t;
    const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, step);
    const double bc1 = 1.0 - std::pow(kBeta1, adam_t);
    const double bc2 = 1.0 - std::pow(kBeta2, adam_t);
    std::vector<double> values = model.params().values;
    for (std::size_t i = 0; i < n_params; ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * lg.grad[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * lg.grad[i] * lg.grad[i];
      values[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
    }
    model.set_values(std::move(values));
  }

  res.final_loss = training_loss(model, dataset, cfg.w_l);
  if (!(res.final_loss <= res.initial_loss)) {
    model.set_values(start_values);
    res.final_loss = res.initial_loss;
    res.reverted = true;
  }
  return res;
}

}  // namespace acumen
