#include "acumen/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "acumen/errors.hpp"

namespace acumen {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

std::vector<double> powerlaw_gaussian(double beta, int n, Rng& rng) {
  if (n < 1) throw ShapeError("noise length must be >= 1");
  std::vector<double> y(static_cast<std::size_t>(n));
  if (beta == 0.0 || n == 1) {
    for (double& v : y) v = rng.normal();
    return y;
  }

  // Shape a white Gaussian spectrum by f^(-beta/2), inverse-transform and
  // rescale to unit marginal variance. The zero-frequency bin reuses the
  // first positive frequency's scale.
  const int nf = n / 2 + 1;
  std::vector<double> scale(static_cast<std::size_t>(nf));
  for (int k = 1; k < nf; ++k)
    scale[static_cast<std::size_t>(k)] =
        std::pow(static_cast<double>(k) / n, -beta / 2.0);
  scale[0] = scale[1];

  double w_sq = 0.0;
  for (int k = 1; k < nf; ++k) {
    double w = scale[static_cast<std::size_t>(k)];
    if (k == nf - 1) w *= (1 + n % 2) / 2.0;
    w_sq += w * w;
  }
  const double sigma = 2.0 * std::sqrt(w_sq) / n;

  std::vector<double> sr(static_cast<std::size_t>(nf)), si(static_cast<std::size_t>(nf));
  for (int k = 0; k < nf; ++k) sr[static_cast<std::size_t>(k)] = rng.normal() * scale[k];
  for (int k = 0; k < nf; ++k) si[static_cast<std::size_t>(k)] = rng.normal() * scale[k];
  si[0] = 0.0;
  sr[0] *= std::numbers::sqrt2;
  const bool even = n % 2 == 0;
  if (even) {
    si[static_cast<std::size_t>(nf - 1)] = 0.0;
    sr[static_cast<std::size_t>(nf - 1)] *= std::numbers::sqrt2;
  }

  // inverse real DFT (direct form; horizons are short)
  const int k_hi = even ? nf - 2 : nf - 1;
  for (int t = 0; t < n; ++t) {
    double acc = sr[0];
    for (int k = 1; k <= k_hi; ++k) {
      const double th = 2.0 * std::numbers::pi * k * t / n;
      acc += 2.0 * (sr[static_cast<std::size_t>(k)] * std::cos(th) -
                    si[static_cast<std::size_t>(k)] * std::sin(th));
    }
    if (even) acc += sr[static_cast<std::size_t>(nf - 1)] * std::cos(std::numbers::pi * t);
    y[static_cast<std::size_t>(t)] = acc / n / sigma;
  }
  return y;
}

std::vector<ActionSeq> sample_colored(const ActionSeq& mu, const ActionSeq& sigma,
                                      double beta, int n_population, Rng& rng,
                                      double action_limit) {
  const int h = static_cast<int>(mu.size());
  if (h == 0 || sigma.size() != mu.size()) throw ShapeError("mu/sigma horizon mismatch");
  const int m = static_cast<int>(mu.front().size());

  std::vector<ActionSeq> out;
  out.reserve(static_cast<std::size_t>(n_population));
  for (int p = 0; p < n_population; ++p) {
    ActionSeq seq(static_cast<std::size_t>(h), std::vector<double>(static_cast<std::size_t>(m)));
    for (int d = 0; d < m; ++d) {
      const std::vector<double> eps = powerlaw_gaussian(beta, h, rng);
      for (int k = 0; k < h; ++k) {
        const double v = mu[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] +
                         sigma[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] *
                             eps[static_cast<std::size_t>(k)];
        seq[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] =
            std::clamp(v, -action_limit, action_limit);
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

OccupancyGrid::OccupancyGrid(std::array<double, 2> x_range, std::array<double, 2> y_range,
                             int resolution)
    : x_range_(x_range), y_range_(y_range), res_(resolution) {
  if (res_ < 1) throw ShapeError("grid resolution must be >= 1");
  if (!(x_range_[1] > x_range_[0]) || !(y_range_[1] > y_range_[0]))
    throw ShapeError("grid bounds must be non-empty");
  visits_.assign(static_cast<std::size_t>(res_) * res_, 0);
}

int OccupancyGrid::cell_index(double x, double y) const {
  const auto axis = [this](double v, const std::array<double, 2>& r) {
    const double frac = (v - r[0]) / (r[1] - r[0]);
    const int c = static_cast<int>(std::floor(frac * res_));
    return std::clamp(c, 0, res_ - 1);
  };
  return axis(y, y_range_) * res_ + axis(x, x_range_);
}

int OccupancyGrid::unique_visited() const {
  int count = 0;
  for (int v : visits_) count += v > 0 ? 1 : 0;
  return count;
}

double reward_box(const StateEstimate& z_pred, const BoxRotationReward& spec) {
  const double yaw_err = wrap_angle(z_pred.pose[2] - spec.target_yaw);
  const double drift = std::hypot(z_pred.pose[0] - spec.initial_pos[0],
                                  z_pred.pose[1] - spec.initial_pos[1]);
  double r = -yaw_err * yaw_err;
  if (drift > spec.threshold) r -= spec.penalty_weight * drift;
  return r;
}

double reward_goal_heading(const StateEstimate& z_before, const StateEstimate& z_after,
                           const GoalHeadingReward& spec) {
  const double vx0 = spec.goal[0] - z_before.pose[0];
  const double vy0 = spec.goal[1] - z_before.pose[1];
  const double vx1 = spec.goal[0] - z_after.pose[0];
  const double vy1 = spec.goal[1] - z_after.pose[1];
  const double n0 = std::hypot(vx0, vy0);
  const double n1 = std::hypot(vx1, vy1);

  double heading = 0.0;
  if (n0 >= 1e-6 && n1 >= 1e-6) {
    const double c = std::clamp((vx0 * vx1 + vy0 * vy1) / (n0 * n1), -1.0, 1.0);
    const double u = std::acos(c);
    const double tol = spec.heading_tol_deg * std::numbers::pi / 180.0;
    if (u > tol) heading = u;
  }
  return -n1 - heading;
}

double reward_exploration(const StateEstimate& z_pred, const ExplorationReward& spec) {
  if (spec.grid == nullptr) throw ShapeError("exploration reward needs a grid");
  return -static_cast<double>(spec.grid->visits_at(z_pred.pose[0], z_pred.pose[1]));
}

double evaluate_reward(const RewardSpec& spec, const StateEstimate& z_before,
                       const StateEstimate& z_after) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BoxRotationReward>) return reward_box(z_after, s);
        else if constexpr (std::is_same_v<T, GoalHeadingReward>)
          return reward_goal_heading(z_before, z_after, s);
        else
          return reward_exploration(z_after, s);
      },
      spec);
}

int PlannerConfig::action_dim() const {
  if (mode == PlannerMode::kRandomShoot) return static_cast<int>(discrete_values.size());
  return static_cast<int>(mu0.size());
}

void PlannerConfig::validate() const {
  if (n_population < 1) throw ShapeError("population must be >= 1");
  if (n_elites < 1 || n_elites > n_population)
    throw ShapeError("elite count must be in [1, N_p]");
  if (horizon < 1) throw ShapeError("horizon must be >= 1");
  if (noise_beta < 0.0) throw ShapeError("noise color must be >= 0");
  if (noise_beta > 0.0 && mode == PlannerMode::kCem && horizon < 2)
    throw ShapeError("colored noise needs horizon >= 2");
  if (max_iterations < 1) throw ShapeError("iteration cap must be >= 1");
  if (sigma_smoothing < 0.0 || sigma_smoothing >= 1.0)
    throw ShapeError("sigma smoothing must be in [0,1)");
  if (!(plan_duration > 0.0)) throw ShapeError("plan duration must be positive");
  if (mode == PlannerMode::kCem) {
    if (mu0.empty() || mu0.size() != sigma0.size())
      throw ShapeError("mu0/sigma0 must be non-empty and match");
  } else {
    if (discrete_values.empty()) throw ShapeError("random shooting needs a discrete set");
    for (const auto& vals : discrete_values)
      if (vals.empty()) throw ShapeError("empty discrete value set");
  }
}

double score_sequence(const DynamicsModel& model, const StateEstimate& z0, double t0,
                      const ActionSchedule& history, const ActionSeq& candidate,
                      double dt, const RewardSpec& reward) {
  // candidate knots sit at the left edge of H regular intervals over
  // [t0, t0+dt]: the first command takes effect at the planning time, and
  // each one stays live for a full interval
  const int h = static_cast<int>(candidate.size());
  ActionSchedule sched = history;
  for (int k = 0; k < h; ++k)
    sched.append(t0 + dt * k / h, candidate[static_cast<std::size_t>(k)]);
  try {
    const StateEstimate z_end = model.predict(z0, t0, sched, dt);
    return evaluate_reward(reward, z0, z_end);
  } catch (const IntegrationDivergedError&) {
    return kNegInf;
  } catch (const StepUnderflowError&) {
    return kNegInf;
  }
}

CemResult cem_optimize(const PlannerConfig& cfg,
                       const std::function<double(const ActionSeq&)>& scorer, Rng& rng) {
  cfg.validate();
  const int h = cfg.horizon;
  const std::size_t m = cfg.mu0.size();

  ActionSeq mu(static_cast<std::size_t>(h), cfg.mu0);
  ActionSeq sigma(static_cast<std::size_t>(h), cfg.sigma0);

  struct Scored {
    ActionSeq seq;
    double score;
  };
  std::vector<Scored> elites;
  CemResult res;
  res.best_score = kNegInf;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    res.iterations = iter + 1;
    const std::vector<ActionSeq> samples =
        sample_colored(mu, sigma, cfg.noise_beta, cfg.n_population, rng, cfg.action_limit);

    std::vector<Scored> pool;
    if (cfg.keep_elites) pool = elites;
    for (const ActionSeq& s : samples) pool.push_back({s, scorer(s)});

    std::stable_sort(pool.begin(), pool.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });
    const std::size_t n_keep = std::min<std::size_t>(cfg.n_elites, pool.size());
    elites.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_keep));

    if (elites.empty() || elites.front().score == kNegInf) throw PlannerDegenerateError();
    if (elites.front().score > res.best_score) {
      res.best_score = elites.front().score;
      res.best = elites.front().seq;
    }

    // refit the sampling distribution to the elite set
    double sigma_mean = 0.0;
    for (int k = 0; k < h; ++k) {
      for (std::size_t d = 0; d < m; ++d) {
        double mean = 0.0;
        for (const Scored& e : elites) mean += e.seq[static_cast<std::size_t>(k)][d];
        mean /= static_cast<double>(elites.size());
        double var = 0.0;
        for (const Scored& e : elites) {
          const double dv = e.seq[static_cast<std::size_t>(k)][d] - mean;
          var += dv * dv;
        }
        var /= static_cast<double>(elites.size());
        mu[static_cast<std::size_t>(k)][d] = mean;
        sigma[static_cast<std::size_t>(k)][d] =
            std::max(std::sqrt(var),
                     cfg.sigma_smoothing * sigma[static_cast<std::size_t>(k)][d]);
        sigma_mean += sigma[static_cast<std::size_t>(k)][d];
      }
    }
    sigma_mean /= static_cast<double>(h) * static_cast<double>(m);
    if (cfg.sigma_floor > 0.0 && sigma_mean <= cfg.sigma_floor) break;
  }
  return res;
}

CemResult cem_select(const DynamicsModel& model, const StateEstimate& z0, double t0,
                     const ActionSchedule& history, const PlannerConfig& cfg,
                     const RewardSpec& reward, Rng& rng) {
  auto scorer = [&](const ActionSeq& seq) {
    return score_sequence(model, z0, t0, history, seq, cfg.plan_duration, reward);
  };
  return cem_optimize(cfg, scorer, rng);
}

namespace {

// smallest-norm, then lexicographic
bool action_tie_before(const std::vector<double>& a, const std::vector<double>& b) {
  double na = 0.0, nb = 0.0;
  for (double v : a) na += v * v;
  for (double v : b) nb += v * v;
  if (na != nb) return na < nb;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

ShootResult shoot_select(const DynamicsModel& model, const StateEstimate& z0, double t0,
                         const ActionSchedule& history, const PlannerConfig& cfg,
                         const RewardSpec& reward, Rng& rng) {
  cfg.validate();
  if (cfg.mode != PlannerMode::kRandomShoot)
    throw ShapeError("shoot_select requires random-shoot mode");

  const std::size_t dims = cfg.discrete_values.size();
  std::size_t total = 1;
  for (const auto& vals : cfg.discrete_values) total *= vals.size();

  std::vector<std::vector<double>> candidates;
  if (total <= static_cast<std::size_t>(cfg.n_population)) {
    // exhaustive enumeration, last dimension fastest
    std::vector<std::size_t> idx(dims, 0);
    for (std::size_t c = 0; c < total; ++c) {
      std::vector<double> a(dims);
      for (std::size_t d = 0; d < dims; ++d) a[d] = cfg.discrete_values[d][idx[d]];
      candidates.push_back(std::move(a));
      for (std::size_t d = dims; d-- > 0;) {
        if (++idx[d] < cfg.discrete_values[d].size()) break;
        idx[d] = 0;
      }
    }
  } else {
    for (int c = 0; c < cfg.n_population; ++c) {
      std::vector<double> a(dims);
      for (std::size_t d = 0; d < dims; ++d)
        a[d] = cfg.discrete_values[d][static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(cfg.discrete_values[d].size())))];
      candidates.push_back(std::move(a));
    }
  }

  ShootResult res;
  res.n_candidates = static_cast<int>(candidates.size());
  res.score = kNegInf;
  bool any_finite = false;
  for (const std::vector<double>& a : candidates) {
    const double s =
        score_sequence(model, z0, t0, history, ActionSeq{a}, cfg.plan_duration, reward);
    if (s == kNegInf) continue;
    if (!any_finite || s > res.score ||
        (s == res.score && action_tie_before(a, res.action))) {
      res.score = s;
      res.action = a;
      any_finite = true;
    }
  }
  if (!any_finite) throw PlannerDegenerateError();
  return res;
}

ActionSeq select_command(const DynamicsModel& model, const StateEstimate& z0, double t0,
                         const ActionSchedule& history, const PlannerConfig& cfg,
                         const RewardSpec& reward, Rng& rng) {
  if (cfg.mode == PlannerMode::kCem)
    return cem_select(model, z0, t0, history, cfg, reward, rng).best;
  return ActionSeq{shoot_select(model, z0, t0, history, cfg, reward, rng).action};
}

}  // namespace acumen
