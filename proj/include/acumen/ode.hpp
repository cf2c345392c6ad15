#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "acumen/errors.hpp"
#include "acumen/schedule.hpp"
#include "acumen/tape.hpp"

namespace acumen {

struct SolverSpec {
  enum class Kind { kFixedRk4, kAdaptiveDopri };
  Kind kind = Kind::kFixedRk4;
  int n_steps = 8;      // fixed kind
  double rtol = 1e-6;   // adaptive kind
  double atol = 1e-8;

  static SolverSpec rk4(int n_steps) { return {Kind::kFixedRk4, n_steps, 0.0, 0.0}; }
  static SolverSpec dopri(double rtol, double atol) {
    return {Kind::kAdaptiveDopri, 0, rtol, atol};
  }

  void validate() const {
    if (kind == Kind::kFixedRk4) {
      if (n_steps < 1) throw ShapeError("fixed solver needs n_steps >= 1");
    } else {
      if (!(rtol > 0.0) || !(atol > 0.0))
        throw ShapeError("adaptive solver needs positive rtol/atol");
    }
  }
};

// One accepted step of an adaptive solve; replaying these as a fixed
// sequence is how gradients are taken through adaptive integrations.
struct RealizedStep {
  double t;
  double h;
};

namespace detail {

template <class S>
void check_finite_state(std::span<const S> z, double t) {
  for (const S& v : z)
    if (!std::isfinite(ad_value(v))) throw IntegrationDivergedError(t);
}

// Evaluates f(t, z, u(t)) with the schedule interpolated into a scratch
// buffer; an empty schedule feeds an empty command span.
template <class S, class Field>
class FieldEval {
 public:
  FieldEval(Field& f, const ActionSchedule* sched)
      : f_(f), sched_(sched), u_(sched != nullptr ? sched->action_dim() : 0) {}

  void operator()(double t, std::span<const S> z, std::span<S> dz) {
    if (sched_ != nullptr && !sched_->empty()) sched_->value_into(t, u_);
    f_(t, z, std::span<const double>(u_), dz);
  }

 private:
  Field& f_;
  const ActionSchedule* sched_;
  std::vector<double> u_;
};

}  // namespace detail

// Classic RK4 with n_steps uniform steps over [t0, t1].
template <class S, class Field>
std::vector<S> integrate_rk4(Field&& field, std::span<const S> z0, double t0, double t1,
                             int n_steps, const ActionSchedule* sched = nullptr) {
  if (!(t1 >= t0)) throw OrderingError("integrate requires t1 >= t0");
  detail::check_finite_state(z0, t0);
  std::vector<S> y(z0.begin(), z0.end());
  if (t1 == t0) return y;

  detail::FieldEval<S, Field> f(field, sched);
  const std::size_t n = y.size();
  const double h = (t1 - t0) / n_steps;
  std::vector<S> k1(n), k2(n), k3(n), k4(n), tmp(n);

  for (int step = 0; step < n_steps; ++step) {
    const double t = t0 + step * h;
    f(t, std::span<const S>(y), std::span<S>(k1));
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + k1[i] * (0.5 * h);
    f(t + 0.5 * h, std::span<const S>(tmp), std::span<S>(k2));
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + k2[i] * (0.5 * h);
    f(t + 0.5 * h, std::span<const S>(tmp), std::span<S>(k3));
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + k3[i] * h;
    f(t + h, std::span<const S>(tmp), std::span<S>(k4));
    for (std::size_t i = 0; i < n; ++i)
      y[i] = y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
    detail::check_finite_state(std::span<const S>(y), t + h);
  }
  return y;
}

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double kDpC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
inline constexpr double kDpA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
inline constexpr double kDpB5[7] = {35.0 / 384,     0.0,        500.0 / 1113, 125.0 / 192,
                                    -2187.0 / 6784, 11.0 / 84,  0.0};
inline constexpr double kDpB4[7] = {5179.0 / 57600,    0.0,          7571.0 / 16695, 393.0 / 640,
                                    -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

// One 5th-order Dormand-Prince update of y over [t, t+h]; err untouched if null.
template <class S, class F>
void dopri_update(F& f, double t, double h, std::vector<S>& y,
                  std::vector<std::vector<S>>& k, std::vector<S>& tmp,
                  std::vector<double>* err) {
  const std::size_t n = y.size();
  f(t, std::span<const S>(y), std::span<S>(k[0]));
  for (int s = 1; s < 7; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      S acc = y[i];
      for (int j = 0; j < s; ++j) acc = acc + k[j][i] * (h * kDpA[s][j]);
      tmp[i] = acc;
    }
    f(t + kDpC[s] * h, std::span<const S>(tmp), std::span<S>(k[s]));
  }
  if (err != nullptr) {
    err->assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (int s = 0; s < 7; ++s)
        (*err)[i] += (kDpB5[s] - kDpB4[s]) * ad_value(k[s][i]) * h;
  }
  for (std::size_t i = 0; i < n; ++i) {
    S acc = y[i];
    for (int s = 0; s < 7; ++s) {
      if (kDpB5[s] != 0.0) acc = acc + k[s][i] * (h * kDpB5[s]);
    }
    y[i] = acc;
  }
}

}  // namespace detail

// Adaptive Dormand-Prince 4(5) with the standard proportional step
// controller. Accepted steps are appended to `realized` when provided, so a
// later taped pass can replay the exact same discretization.
template <class Field>
std::vector<double> integrate_dopri(Field&& field, std::span<const double> z0, double t0,
                                    double t1, double rtol, double atol,
                                    const ActionSchedule* sched = nullptr,
                                    std::vector<RealizedStep>* realized = nullptr) {
  if (!(t1 >= t0)) throw OrderingError("integrate requires t1 >= t0");
  detail::check_finite_state(z0, t0);
  std::vector<double> y(z0.begin(), z0.end());
  if (t1 == t0) return y;

  detail::FieldEval<double, Field> f(field, sched);
  const std::size_t n = y.size();
  const double span = t1 - t0;
  const double h_min = 1e-12 * span;
  std::vector<std::vector<double>> k(7, std::vector<double>(n));
  std::vector<double> tmp(n), err(n), y_new(n);

  double t = t0;
  double h = span / 100.0;
  while (t < t1) {
    h = std::min(h, t1 - t);
    if (h < h_min) throw StepUnderflowError(h);
    y_new = y;
    detail::dopri_update(f, t, h, y_new, k, tmp, &err);

    double err_norm = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(y_new[i])) { finite = false; break; }
      const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      const double e = err[i] / scale;
      err_norm += e * e;
    }
    err_norm = std::sqrt(err_norm / static_cast<double>(n));

    if (finite && err_norm <= 1.0) {
      if (realized != nullptr) realized->push_back({t, h});
      y = y_new;
      t += h;
      const double factor = err_norm == 0.0 ? 5.0 : 0.9 * std::pow(err_norm, -0.2);
      h *= std::clamp(factor, 0.2, 5.0);
    } else if (!finite) {
      // Non-finite trial on an already tiny step means the field itself blew up.
      if (h <= 16.0 * h_min) throw IntegrationDivergedError(t);
      h *= 0.2;
    } else {
      h *= std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 1.0);
    }
  }
  detail::check_finite_state(std::span<const double>(y), t1);
  return y;
}

// Re-runs a recorded adaptive discretization as if it were a fixed-step
// method (the accepted-step sequence is frozen; only the 5th-order update
// is traced).
template <class S, class Field>
std::vector<S> integrate_dopri_replay(Field&& field, std::span<const S> z0,
                                      std::span<const RealizedStep> steps,
                                      const ActionSchedule* sched = nullptr) {
  std::vector<S> y(z0.begin(), z0.end());
  detail::FieldEval<S, Field> f(field, sched);
  const std::size_t n = y.size();
  std::vector<std::vector<S>> k(7, std::vector<S>(n));
  std::vector<S> tmp(n);
  for (const RealizedStep& s : steps) {
    detail::dopri_update(f, s.t, s.h, y, k, tmp, nullptr);
    detail::check_finite_state(std::span<const S>(y), s.t + s.h);
  }
  return y;
}

// Forward integration per the solver spec.
template <class Field>
std::vector<double> integrate(Field&& field, std::span<const double> z0, double t0, double t1,
                              const ActionSchedule& sched, const SolverSpec& spec) {
  spec.validate();
  if (spec.kind == SolverSpec::Kind::kFixedRk4)
    return integrate_rk4(field, z0, t0, t1, spec.n_steps, &sched);
  return integrate_dopri(field, z0, t0, t1, spec.rtol, spec.atol, &sched);
}

}  // namespace acumen
