#include "acumen/meta.hpp"

#include <algorithm>
#include <cmath>

#include "acumen/errors.hpp"
#include "acumen/parallel.hpp"

namespace acumen {

void MetaConfig::validate() const {
  if (n_envs < 1) throw ShapeError("need at least one environment per meta-iteration");
  if (!(alpha >= 0.0)) throw ShapeError("meta learning rate must be >= 0");
  if (!(sigma > 0.0)) throw ShapeError("perturbation std must be positive");
  if (!(r_split > 0.0) || !(r_split < 1.0)) throw ShapeError("split ratio must be in (0,1)");
  if (meta_iterations < 1) throw ShapeError("meta iteration count must be >= 1");
  if (m_test < 0) throw ShapeError("test episode count must be >= 0");
  if (eval_every < 0) throw ShapeError("eval cadence must be >= 0");
  if (antithetic && n_envs % 2 != 0)
    throw ShapeError("antithetic sampling needs an even environment count");
  if (parallel < 1) throw ShapeError("parallelism must be >= 1");
}

MetaUpdateResult meta_update(const std::vector<double>& theta,
                             std::span<const MetaUpdateInput> inputs, double alpha,
                             double sigma) {
  if (inputs.empty()) throw ShapeError("meta update needs at least one report");
  for (const MetaUpdateInput& in : inputs)
    if (in.epsilon.size() != theta.size())
      throw ShapeError("perturbation size does not match the prior");

  double mean_loss = 0.0;
  int n_nonempty = 0;
  for (const MetaUpdateInput& in : inputs) {
    if (!in.val_empty) {
      mean_loss += in.val_loss;
      ++n_nonempty;
    }
  }
  MetaUpdateResult res;
  if (n_nonempty == 0) {
    res.theta = theta;
    res.skipped = true;
    return res;
  }
  mean_loss /= n_nonempty;

  res.theta = theta;
  const double scale = alpha / (static_cast<double>(inputs.size()) * sigma);
  for (const MetaUpdateInput& in : inputs) {
    const double loss = in.val_empty ? mean_loss : in.val_loss;
    if (in.val_empty) ++res.n_substituted;
    for (std::size_t j = 0; j < res.theta.size(); ++j)
      res.theta[j] -= scale * loss * in.epsilon[j];
  }
  return res;
}

TaskSpec sample_task(const MetaSetup& setup, Rng& rng) {
  TaskSpec task = setup.base_task;
  if (setup.variant == EnvVariant::kUnicycleWind) {
    if (setup.randomize_goal_direction) {
      const double radius = std::hypot(task.goal[0], task.goal[1]);
      const double base = std::atan2(task.goal[1], task.goal[0]);
      const double phi = base + rng.uniform(-setup.goal_cone_rad, setup.goal_cone_rad);
      task.goal = {radius * std::cos(phi), radius * std::sin(phi)};
    }
  } else if (setup.initial_pose_noise > 0.0) {
    task.initial_pose[0] += rng.normal(0.0, setup.initial_pose_noise);
    task.initial_pose[1] += rng.normal(0.0, setup.initial_pose_noise);
    task.initial_pose[2] += rng.normal(0.0, setup.initial_pose_noise);
  }
  return task;
}

namespace {

EpisodeSetup episode_setup_from(const MetaSetup& setup, EnvParams env, TaskSpec task,
                                std::uint64_t seed) {
  EpisodeSetup es;
  es.env = std::move(env);
  es.task = std::move(task);
  es.episode = setup.episode;
  es.irregularity = setup.irregularity;
  es.planner = setup.planner;
  es.train = setup.train;
  es.r_split = setup.meta.r_split;
  es.seed = seed;
  return es;
}

struct StepStats {
  double mean_all = 0.0, std_all = 0.0;
  double mean_solved = 0.0, std_solved = 0.0;
  int n_solved = 0;
};

StepStats step_stats(std::span<const EpisodeReport> reports) {
  StepStats s;
  if (reports.empty()) return s;
  double sum = 0.0, sum_sq = 0.0, sum_s = 0.0, sum_s_sq = 0.0;
  for (const EpisodeReport& r : reports) {
    const double steps = r.applied_actions;
    sum += steps;
    sum_sq += steps * steps;
    if (r.outcome == EpisodeStatus::kSolved) {
      ++s.n_solved;
      sum_s += steps;
      sum_s_sq += steps * steps;
    }
  }
  const double n = static_cast<double>(reports.size());
  s.mean_all = sum / n;
  s.std_all = std::sqrt(std::max(0.0, sum_sq / n - s.mean_all * s.mean_all));
  if (s.n_solved > 0) {
    const double ns = s.n_solved;
    s.mean_solved = sum_s / ns;
    s.std_solved = std::sqrt(std::max(0.0, sum_s_sq / ns - s.mean_solved * s.mean_solved));
  }
  return s;
}

}  // namespace

std::vector<EpisodeReport> evaluate_prior(const DynamicsModel& prototype,
                                          const std::vector<double>& theta,
                                          const MetaSetup& setup, EnvSplit split, int n,
                                          std::uint64_t eval_seed) {
  std::vector<EpisodeSetup> setups;
  setups.reserve(static_cast<std::size_t>(n));
  Rng env_rng = Rng::derive(eval_seed, {0xe41ULL});
  Rng task_rng = Rng::derive(eval_seed, {0x7a5cULL});
  for (int j = 0; j < n; ++j) {
    const EnvParams env = sample_env(split, setup.variant, env_rng, setup.n_directions);
    const TaskSpec task = sample_task(setup, task_rng);
    setups.push_back(episode_setup_from(setup, env, task,
                                        mix64(eval_seed ^ mix64(0x1000 + j))));
  }

  std::vector<EpisodeReport> reports(static_cast<std::size_t>(n));
  parallel_for(n, setup.meta.parallel, [&](int j) {
    std::unique_ptr<DynamicsModel> model = prototype.clone();
    model->set_values(theta);
    reports[static_cast<std::size_t>(j)] = run_episode(*model, setups[static_cast<std::size_t>(j)]);
  });
  return reports;
}

MetaTrainResult meta_train(const DynamicsModel& prototype, const MetaSetup& setup) {
  setup.meta.validate();
  setup.episode.validate();
  setup.irregularity.validate();
  setup.train.validate();

  const std::size_t n_params = prototype.params().values.size();
  std::vector<double> theta = prototype.params().values;

  MetaTrainResult result;
  Rng eps_rng = Rng::derive(setup.meta.seed, {0xe9eULL});
  Rng env_rng = Rng::derive(setup.meta.seed, {0xe40ULL});
  Rng task_rng = Rng::derive(setup.meta.seed, {0x7a5bULL});

  const int n = setup.meta.n_envs;
  for (int iter = 0; iter < setup.meta.meta_iterations; ++iter) {
    // draw everything sequentially so episode fan-out is order-independent
    std::vector<std::vector<double>> epsilons(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto& eps = epsilons[static_cast<std::size_t>(i)];
      if (setup.meta.antithetic && i % 2 == 1) {
        eps = epsilons[static_cast<std::size_t>(i - 1)];
        for (double& v : eps) v = -v;
      } else {
        eps.resize(n_params);
        for (double& v : eps) v = eps_rng.normal();
      }
    }
    std::vector<EpisodeSetup> setups;
    setups.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const EnvParams env =
          sample_env(EnvSplit::kTrain, setup.variant, env_rng, setup.n_directions);
      const TaskSpec task = sample_task(setup, task_rng);
      setups.push_back(episode_setup_from(
          setup, env, task, mix64(setup.meta.seed ^ mix64((iter + 1) * 1024ULL + i))));
    }

    std::vector<EpisodeReport> reports(static_cast<std::size_t>(n));
    parallel_for(n, setup.meta.parallel, [&](int i) {
      std::vector<double> start = theta;
      for (std::size_t j = 0; j < n_params; ++j)
        start[j] += setup.meta.sigma * epsilons[static_cast<std::size_t>(i)][j];
      std::unique_ptr<DynamicsModel> model = prototype.clone();
      model->set_values(std::move(start));
      reports[static_cast<std::size_t>(i)] = run_episode(*model, setups[static_cast<std::size_t>(i)]);
    });

    std::vector<MetaUpdateInput> update_in;
    update_in.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      update_in.push_back({reports[static_cast<std::size_t>(i)].val_loss,
                           reports[static_cast<std::size_t>(i)].val_empty,
                           std::move(epsilons[static_cast<std::size_t>(i)])});
    const MetaUpdateResult upd =
        meta_update(theta, update_in, setup.meta.alpha, setup.meta.sigma);
    theta = upd.theta;

    MetaIterationMetrics m;
    m.iteration = iter;
    m.n_episodes = n;
    const StepStats stats = step_stats(reports);
    m.n_solved = stats.n_solved;
    m.solved_pct = 100.0 * stats.n_solved / static_cast<double>(n);
    m.mean_steps_all = stats.mean_all;
    m.std_steps_all = stats.std_all;
    m.mean_steps_solved = stats.mean_solved;
    m.std_steps_solved = stats.std_solved;

    const bool last_iter = iter + 1 == setup.meta.meta_iterations;
    const bool eval_now =
        setup.meta.m_test > 0 &&
        ((setup.meta.eval_every > 0 && (iter + 1) % setup.meta.eval_every == 0) || last_iter);
    if (eval_now) {
      const auto test_reports =
          evaluate_prior(prototype, theta, setup, EnvSplit::kTest, setup.meta.m_test,
                         mix64(setup.meta.seed ^ mix64(0x7e57ULL + iter)));
      int solved = 0;
      for (const EpisodeReport& r : test_reports)
        solved += r.outcome == EpisodeStatus::kSolved ? 1 : 0;
      m.has_test = true;
      m.test_solved_pct = 100.0 * solved / static_cast<double>(setup.meta.m_test);
      if (m.test_solved_pct > result.best_test_pct) {
        result.best_test_pct = m.test_solved_pct;
        result.best_iteration = iter;
        result.theta_best = theta;
      }
    }
    result.metrics.push_back(m);
  }

  result.theta_last = theta;
  if (result.theta_best.empty()) {
    result.theta_best = theta;
    result.best_iteration = setup.meta.meta_iterations - 1;
  }
  return result;
}

}  // namespace acumen
