#include "acumen/model.hpp"

#include <cmath>
#include <utility>

#include "acumen/errors.hpp"

namespace acumen {

namespace {

// Affine-layer walk shared by the double and taped paths. Parameters are
// addressed by a running offset into the flat vector.
template <class S>
void mlp_eval(const ModelShape& sh, std::span<const S> th, double t,
              std::span<const double> u, std::span<const S> z, std::span<S> out,
              std::vector<S>& buf_a, std::vector<S>& buf_b) {
  const int m = static_cast<int>(u.size());
  std::size_t off = 0;

  std::vector<S>* cur = &buf_a;
  std::vector<S>* nxt = &buf_b;
  int cur_n = 0;

  for (std::size_t l = 0; l < sh.hidden.size(); ++l) {
    const int n_out = sh.hidden[l];
    const int n_in = l == 0 ? sh.input_dim : cur_n;
    const std::size_t w_off = off;
    off += static_cast<std::size_t>(n_out) * n_in;
    const std::size_t b_off = off;
    off += n_out;
    nxt->resize(n_out);
    for (int i = 0; i < n_out; ++i) {
      const std::size_t row = w_off + static_cast<std::size_t>(i) * n_in;
      S acc = th[b_off + i];
      if (l == 0) {
        acc = acc + th[row] * t;
        for (int j = 0; j < m; ++j) acc = acc + th[row + 1 + j] * u[j];
        for (int j = 0; j < kStateDim; ++j) acc = acc + th[row + 1 + m + j] * z[j];
      } else {
        for (int j = 0; j < n_in; ++j) acc = acc + th[row + j] * (*cur)[j];
      }
      (*nxt)[i] = ad_tanh(acc);
    }
    std::swap(cur, nxt);
    cur_n = n_out;
  }

  const int n_in = sh.hidden.empty() ? sh.input_dim : cur_n;
  const std::size_t w_off = off;
  off += static_cast<std::size_t>(sh.output_dim) * n_in;
  const std::size_t b_off = off;
  for (int i = 0; i < sh.output_dim; ++i) {
    const std::size_t row = w_off + static_cast<std::size_t>(i) * n_in;
    S acc = th[b_off + i];
    if (sh.hidden.empty()) {
      acc = acc + th[row] * t;
      for (int j = 0; j < m; ++j) acc = acc + th[row + 1 + j] * u[j];
      for (int j = 0; j < kStateDim; ++j) acc = acc + th[row + 1 + m + j] * z[j];
    } else {
      for (int j = 0; j < n_in; ++j) acc = acc + th[row + j] * (*cur)[j];
    }
    out[i] = acc;
  }
}

template <class S>
std::array<S, kStateDim> rnn_rollout(
    const ModelShape& sh, std::span<const S> th, std::span<const S> z0,
    std::span<const std::pair<std::vector<double>, double>> tuples, const S& zero) {
  const std::size_t n_layers = sh.hidden.size();
  std::vector<std::vector<S>> h(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) h[l].assign(sh.hidden[l], zero);

  std::vector<S> x_acc;
  for (const auto& [action, dt] : tuples) {
    if (action.size() + 1 != static_cast<std::size_t>(sh.input_dim))
      throw ShapeError("rnn tuple dimension mismatch");
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const int w = sh.hidden[l];
      const int n_in = l == 0 ? sh.input_dim : sh.hidden[l - 1];
      const std::size_t w_off = off;
      off += static_cast<std::size_t>(w) * n_in;
      const std::size_t u_off = off;
      off += static_cast<std::size_t>(w) * w;
      const std::size_t b_off = off;
      off += w;
      x_acc.resize(w);
      for (int i = 0; i < w; ++i) {
        const std::size_t w_row = w_off + static_cast<std::size_t>(i) * n_in;
        const std::size_t u_row = u_off + static_cast<std::size_t>(i) * w;
        S acc = th[b_off + i];
        if (l == 0) {
          for (int j = 0; j + 1 < sh.input_dim; ++j)
            acc = acc + th[w_row + j] * action[static_cast<std::size_t>(j)];
          acc = acc + th[w_row + sh.input_dim - 1] * dt;
        } else {
          for (int j = 0; j < n_in; ++j) acc = acc + th[w_row + j] * h[l - 1][j];
        }
        for (int j = 0; j < w; ++j) acc = acc + th[u_row + j] * h[l][j];
        x_acc[i] = ad_tanh(acc);
      }
      // lower layers must expose this step's output to the layer above,
      // while the recurrent term above already consumed the old state
      h[l] = x_acc;
    }
  }

  std::array<S, kStateDim> out;
  if (tuples.empty()) {
    for (int i = 0; i < kStateDim; ++i) out[i] = z0[i];
    return out;
  }
  std::size_t off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int w = sh.hidden[l];
    const int n_in = l == 0 ? sh.input_dim : sh.hidden[l - 1];
    off += static_cast<std::size_t>(w) * n_in + static_cast<std::size_t>(w) * w + w;
  }
  const int n_in = n_layers == 0 ? sh.input_dim : sh.hidden.back();
  const std::size_t w_off = off;
  const std::size_t b_off = w_off + static_cast<std::size_t>(sh.output_dim) * n_in;
  const std::vector<S>& top = h.back();
  for (int i = 0; i < sh.output_dim; ++i) {
    const std::size_t row = w_off + static_cast<std::size_t>(i) * n_in;
    S acc = th[b_off + i];
    for (int j = 0; j < n_in; ++j) acc = acc + th[row + j] * top[j];
    out[i] = z0[i] + acc;
  }
  return out;
}

}  // namespace

std::size_t ModelShape::param_count() const {
  std::size_t count = 0;
  int in = input_dim;
  for (int w : hidden) {
    count += static_cast<std::size_t>(w) * in + w;
    if (kind == ModelKind::kRnn) count += static_cast<std::size_t>(w) * w;
    in = w;
  }
  count += static_cast<std::size_t>(output_dim) * in + output_dim;
  return count;
}

ModelShape ModelShape::node(int action_dim, std::vector<int> hidden) {
  ModelShape s;
  s.kind = ModelKind::kNode;
  s.input_dim = 1 + action_dim + kStateDim;
  s.hidden = std::move(hidden);
  return s;
}

ModelShape ModelShape::rnn(int action_dim, std::vector<int> hidden) {
  ModelShape s;
  s.kind = ModelKind::kRnn;
  s.input_dim = action_dim + 1;
  s.hidden = std::move(hidden);
  return s;
}

void ModelParams::validate() const {
  if (values.size() != shape.param_count())
    throw ShapeError("parameter vector does not match layer shapes");
  for (double v : values)
    if (!std::isfinite(v)) throw ShapeError("non-finite model parameter");
}

ModelParams init_params(const ModelShape& shape, Rng& rng) {
  ModelParams p;
  p.shape = shape;
  p.values.assign(shape.param_count(), 0.0);

  std::size_t off = 0;
  auto fill_matrix = [&](int rows, int cols) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    for (int i = 0; i < rows * cols; ++i) p.values[off++] = rng.uniform(-limit, limit);
  };
  int in = shape.input_dim;
  for (int w : shape.hidden) {
    fill_matrix(w, in);
    if (shape.kind == ModelKind::kRnn) fill_matrix(w, w);
    off += static_cast<std::size_t>(w);  // biases stay zero
    in = w;
  }
  fill_matrix(shape.output_dim, in);
  return p;
}

int rnn_width_for(std::size_t target_params, int action_dim, int layers) {
  int best_w = 1;
  std::size_t best_err = SIZE_MAX;
  for (int w = 1; w <= 512; ++w) {
    const auto shape = ModelShape::rnn(action_dim, std::vector<int>(layers, w));
    const std::size_t c = shape.param_count();
    const std::size_t err = c > target_params ? c - target_params : target_params - c;
    if (err < best_err) {
      best_err = err;
      best_w = w;
    }
  }
  return best_w;
}

std::array<double, kStateDim> node_derivative(const ModelParams& params, double t,
                                              std::span<const double> u,
                                              const StateEstimate& z) {
  if (params.shape.kind != ModelKind::kNode) throw ShapeError("expected an N-ODE model");
  if (static_cast<int>(u.size()) + 1 + kStateDim != params.shape.input_dim)
    throw ShapeError("action dimension does not match model input");
  params.validate();
  const auto zf = z.flat();
  std::array<double, kStateDim> out{};
  std::vector<double> a, b;
  mlp_eval<double>(params.shape, params.values, t, u, std::span<const double>(zf), out, a, b);
  return out;
}

NodeModel::NodeModel(ModelParams params, SolverSpec solver)
    : params_(std::move(params)), solver_(solver) {
  if (params_.shape.kind != ModelKind::kNode) throw ShapeError("expected an N-ODE model");
  params_.validate();
  solver_.validate();
}

void NodeModel::set_values(std::vector<double> values) {
  params_.values = std::move(values);
  params_.validate();
}

StateEstimate NodeModel::predict(const StateEstimate& z0, double t0,
                                 const ActionSchedule& sched, double dt) const {
  const int action_dim = params_.shape.input_dim - 1 - kStateDim;
  if (!sched.empty() && static_cast<int>(sched.action_dim()) != action_dim)
    throw ShapeError("schedule action dimension does not match model input");
  std::vector<double> buf_a, buf_b;
  auto field = [&](double t, std::span<const double> zz, std::span<const double> uu,
                   std::span<double> dz) {
    mlp_eval<double>(params_.shape, params_.values, t - t0, uu, zz, dz, buf_a, buf_b);
  };
  const auto zf = z0.flat();
  const std::vector<double> y =
      integrate(field, std::span<const double>(zf), t0, t0 + dt, sched, solver_);
  StateEstimate out = StateEstimate::from_flat({y[0], y[1], y[2], y[3], y[4], y[5]});
  return out.wrapped();
}

std::array<Ad, kStateDim> NodeModel::predict_taped(Tape& tape, std::span<const Ad> theta,
                                                   const StateEstimate& z0, double t0,
                                                   const ActionSchedule& sched,
                                                   double dt) const {
  const auto zf = z0.flat();
  std::vector<Ad> z_ad(kStateDim);
  for (int i = 0; i < kStateDim; ++i) z_ad[i] = make_const(tape, zf[i]);

  std::vector<Ad> buf_a, buf_b;
  auto field = [&](double t, std::span<const Ad> zz, std::span<const double> uu,
                   std::span<Ad> dz) {
    mlp_eval<Ad>(params_.shape, theta, t - t0, uu, zz, dz, buf_a, buf_b);
  };

  std::vector<Ad> y;
  if (solver_.kind == SolverSpec::Kind::kFixedRk4) {
    y = integrate_rk4<Ad>(field, z_ad, t0, t0 + dt, solver_.n_steps, &sched);
  } else {
    // Freeze the accepted-step sequence of a plain forward pass, then trace
    // through it as a fixed method.
    std::vector<double> da, db;
    auto dfield = [&](double t, std::span<const double> zz, std::span<const double> uu,
                      std::span<double> dz) {
      mlp_eval<double>(params_.shape, params_.values, t - t0, uu, zz, dz, da, db);
    };
    std::vector<RealizedStep> steps;
    integrate_dopri(dfield, std::span<const double>(zf), t0, t0 + dt, solver_.rtol,
                    solver_.atol, &sched, &steps);
    y = integrate_dopri_replay<Ad>(field, std::span<const Ad>(z_ad), steps, &sched);
  }
  // no angle re-wrap here: the training loss is wrap-invariant
  std::array<Ad, kStateDim> out;
  for (int i = 0; i < kStateDim; ++i) out[i] = y[i];
  return out;
}

RnnModel::RnnModel(ModelParams params) : params_(std::move(params)) {
  if (params_.shape.kind != ModelKind::kRnn) throw ShapeError("expected an RNN model");
  params_.validate();
}

void RnnModel::set_values(std::vector<double> values) {
  params_.values = std::move(values);
  params_.validate();
}

std::vector<std::pair<std::vector<double>, double>> schedule_to_tuples(
    const ActionSchedule& sched, double t0, double t1) {
  std::vector<std::pair<std::vector<double>, double>> tuples;
  if (sched.empty() || !(t1 > t0)) return tuples;
  const ActionSchedule s = sched.slice(t0, t1);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double tk = std::max(s.times()[k], t0);
    const double tn = k + 1 < s.size() ? std::min(s.times()[k + 1], t1) : t1;
    if (tn - tk > 0.0) tuples.emplace_back(s.action_at(k), tn - tk);
  }
  return tuples;
}

StateEstimate RnnModel::rollout(
    const ModelParams& params, const StateEstimate& z0,
    std::span<const std::pair<std::vector<double>, double>> tuples) {
  for (const auto& [a, dt] : tuples) {
    (void)a;
    if (!(dt > 0.0)) throw ShapeError("rnn tuple requires dt > 0");
  }
  const auto zf = z0.flat();
  const auto y = rnn_rollout<double>(params.shape, params.values,
                                     std::span<const double>(zf), tuples, 0.0);
  return StateEstimate::from_flat(y).wrapped();
}

StateEstimate RnnModel::predict(const StateEstimate& z0, double t0,
                                const ActionSchedule& sched, double dt) const {
  const auto tuples = schedule_to_tuples(sched, t0, t0 + dt);
  return rollout(params_, z0, tuples);
}

std::array<Ad, kStateDim> RnnModel::predict_taped(Tape& tape, std::span<const Ad> theta,
                                                  const StateEstimate& z0, double t0,
                                                  const ActionSchedule& sched,
                                                  double dt) const {
  const auto tuples = schedule_to_tuples(sched, t0, t0 + dt);
  const auto zf = z0.flat();
  std::vector<Ad> z_ad(kStateDim);
  for (int i = 0; i < kStateDim; ++i) z_ad[i] = make_const(tape, zf[i]);
  return rnn_rollout<Ad>(params_.shape, theta, std::span<const Ad>(z_ad), tuples,
                         make_const(tape, 0.0));
}

}  // namespace acumen
