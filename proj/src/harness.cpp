#include "acumen/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "acumen/errors.hpp"
#include "acumen/num_io.hpp"
#include "acumen/parallel.hpp"

namespace acumen {

namespace {

int scaled(int v, double scale, int min_v = 1) {
  return std::max(min_v, static_cast<int>(std::lround(v * scale)));
}

EpisodeSetup make_setup(const MetaSetup& base, EnvParams env, TaskSpec task,
                        std::uint64_t seed) {
  EpisodeSetup es;
  es.env = std::move(env);
  es.task = std::move(task);
  es.episode = base.episode;
  es.irregularity = base.irregularity;
  es.planner = base.planner;
  es.train = base.train;
  es.r_split = base.meta.r_split;
  es.seed = seed;
  return es;
}

EnvParams fixed_reference_env(EnvVariant variant) {
  EnvParams env;
  env.variant = variant;
  if (variant == EnvVariant::kUnicycleWind) {
    env.wind_magnitude = 0.0;  // still air
  } else {
    env.kappa_m = 0.65;  // mid-box surrogate
    env.kappa_r = 1.25;
    env.kappa_s = 0.0;
  }
  return env;
}

std::string outcome_name(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::kSolved: return "solved";
    case EpisodeStatus::kTimeout: return "timeout";
    default: return "running";
  }
}

std::ofstream open_out(const std::string& dir, const std::string& name,
                       std::vector<std::string>& files) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/" + name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open output file: " + path);
  files.push_back(path);
  return os;
}

struct EpisodeRow {
  std::string model;
  double p_drop;
  int pair;
  int target;
  EpisodeReport report;
  TrajectoryMetrics traj;
};

std::vector<std::string> episode_row_header() {
  return {"model", "p_drop", "pair", "target", "outcome",
          "actions", "length", "irregularity"};
}

std::vector<std::string> to_row(const EpisodeRow& r) {
  return {r.model,
          fmt_double(r.p_drop),
          std::to_string(r.pair),
          std::to_string(r.target),
          outcome_name(r.report.outcome),
          std::to_string(r.report.applied_actions),
          fmt_double(r.traj.length),
          fmt_double(r.traj.irregularity)};
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<TrainingExample> collect_random_data(const MetaSetup& base, const EnvParams& env,
                                                 int n_episodes, std::uint64_t seed) {
  std::vector<TrainingExample> data;
  Rng task_rng = Rng::derive(seed, {0x7a51ULL});
  const GroundTruthModel placeholder(env);  // never consulted under random actions
  for (int e = 0; e < n_episodes; ++e) {
    EpisodeSetup es = make_setup(base, env, sample_task(base, task_rng),
                                 mix64(seed ^ mix64(0xc011ec7ULL + e)));
    es.episode.pos_tolerance = 1e-9;  // run out the full budget
    es.episode.yaw_tolerance = 1e-9;
    es.random_actions = true;
    es.adapt_online = false;
    es.keep_dataset = true;
    EpisodeReport rep = run_episode(placeholder, es);
    for (auto& ex : rep.collected_train) data.push_back(std::move(ex));
    for (auto& ex : rep.collected_val) data.push_back(std::move(ex));
  }
  return data;
}

FitResult train_offline(DynamicsModel& model, std::span<const TrainingExample> data,
                        double learning_rate, int steps, int batch_size, double w_l,
                        std::uint64_t seed) {
  TrainConfig tc;
  tc.learning_rate = learning_rate;
  tc.lr_decay = std::exp(std::log(0.1) / std::max(1, steps));  // ~10x decay over the run
  tc.w_l = w_l;
  tc.n_iterations = steps;
  tc.batch_size = batch_size;
  Rng rng = Rng::derive(seed, {0x0ff11eULL});
  return fit_model(model, data, tc, rng);
}

PretrainedPair pretrain_models(const ExperimentConfig& cfg, const EnvParams& env,
                               double scale, std::uint64_t seed, int parallel) {
  MetaSetup base = cfg.setup;
  // stretch the observation gaps so the training intervals cover the
  // planner's rollout horizon
  base.irregularity.k_s = std::max(base.irregularity.k_s, 2);
  const auto data = collect_random_data(base, env, scaled(8, scale), mix64(seed ^ 0xda7aULL));
  if (data.empty()) throw EmptyDatasetError();

  Rng init_rng = Rng::derive(seed, {0x171ULL});
  const ModelParams node_params = init_params(ModelShape::node(2, cfg.model_hidden), init_rng);
  const int width = rnn_width_for(node_params.values.size(), 2);
  const ModelParams rnn_params =
      init_params(ModelShape::rnn(2, std::vector<int>(5, width)), init_rng);

  PretrainedPair pair;
  pair.n_examples = data.size();
  pair.node = std::make_unique<NodeModel>(node_params, cfg.solver);
  pair.rnn = std::make_unique<RnnModel>(rnn_params);

  const int steps = scaled(3000, scale);
  DynamicsModel* models[2] = {pair.node.get(), pair.rnn.get()};
  parallel_for(2, parallel, [&](int i) {
    train_offline(*models[i], data, 4e-3, steps, 32, base.train.w_l,
                  mix64(seed ^ mix64(0x9497ULL + i)));
  });
  return pair;
}

void write_meta_metrics(std::ostream& os, std::span<const MetaIterationMetrics> metrics) {
  for (const MetaIterationMetrics& m : metrics) {
    os << "{\"iteration\":" << m.iteration << ",\"n_episodes\":" << m.n_episodes
       << ",\"solved_pct\":" << fmt_double(m.solved_pct)
       << ",\"mean_steps_all\":" << fmt_double(m.mean_steps_all)
       << ",\"std_steps_all\":" << fmt_double(m.std_steps_all)
       << ",\"n_solved\":" << m.n_solved
       << ",\"mean_steps_solved\":" << fmt_double(m.mean_steps_solved)
       << ",\"std_steps_solved\":" << fmt_double(m.std_steps_solved)
       << ",\"test_solved_pct\":";
    if (m.has_test)
      os << fmt_double(m.test_solved_pct);
    else
      os << "null";
    os << "}\n";
  }
}

void write_csv(std::ostream& os, std::span<const std::string> header,
               std::span<const std::vector<std::string>> rows) {
  for (std::size_t i = 0; i < header.size(); ++i)
    os << header[i] << (i + 1 < header.size() ? "," : "");
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      os << row[i] << (i + 1 < row.size() ? "," : "");
    os << '\n';
  }
}

namespace {

AblationResult suite_no_meta(const ExperimentConfig& cfg, double scale, int parallel) {
  ExperimentConfig c = cfg;
  c.setup.meta.alpha = 0.0;
  c.setup.meta.parallel = parallel;
  c.setup.meta.meta_iterations = scaled(c.setup.meta.meta_iterations, scale);
  c.setup.meta.n_envs = scaled(c.setup.meta.n_envs, scale);
  c.setup.meta.m_test = scaled(c.setup.meta.m_test, scale);
  const auto proto = c.make_prototype();
  const MetaTrainResult res = meta_train(*proto, c.setup);

  AblationResult out;
  auto os = open_out(cfg.out_dir, "no_meta_metrics.jsonl", out.files);
  write_meta_metrics(os, res.metrics);
  std::ostringstream sum;
  sum << "no-meta: best held-out solved " << fmt_double(res.best_test_pct) << "%";
  out.summary = sum.str();
  return out;
}

std::vector<EpisodeRow> paired_episode_rows(const ExperimentConfig& cfg,
                                            const PretrainedPair& pair,
                                            const EnvParams& env,
                                            std::span<const TaskSpec> tasks,
                                            std::span<const double> p_drops, int repeats,
                                            int parallel, std::uint64_t seed) {
  struct Job {
    const DynamicsModel* model;
    std::string name;
    EpisodeSetup setup;
    double p_drop;
    int pair_idx;
    int target_idx;
  };
  std::vector<Job> jobs;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    for (double p : p_drops) {
      for (int r = 0; r < repeats; ++r) {
        EpisodeSetup es = make_setup(cfg.setup, env, tasks[ti],
                                     mix64(seed ^ mix64(0xbeefULL + 1000 * ti +
                                                        static_cast<int>(p * 10) * 100 + r)));
        es.irregularity.p_drop = p;
        jobs.push_back({pair.node.get(), "node", es, p, r, static_cast<int>(ti)});
        jobs.push_back({pair.rnn.get(), "rnn", es, p, r, static_cast<int>(ti)});
      }
    }
  }
  std::vector<EpisodeRow> rows(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), parallel, [&](int i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    EpisodeRow row;
    row.model = job.name;
    row.p_drop = job.p_drop;
    row.pair = job.pair_idx;
    row.target = job.target_idx;
    row.report = run_episode(*job.model, job.setup);
    row.traj = traj_metrics(row.report.truth_path);
    row.traj.applied_actions = row.report.applied_actions;
    row.traj.outcome = row.report.outcome;
    rows[static_cast<std::size_t>(i)] = std::move(row);
  });
  return rows;
}

AblationResult suite_rnn_vs_node(const ExperimentConfig& cfg, double scale, int parallel,
                                 bool full_sweep) {
  const EnvParams env = fixed_reference_env(cfg.setup.variant);
  const PretrainedPair pair = pretrain_models(cfg, env, scale, cfg.seed, parallel);

  std::vector<TaskSpec> tasks;
  if (full_sweep) {
    // five positional targets spread over the quadrants
    for (const auto& g : {std::array<double, 2>{3.0, -2.0}, {-3.0, -2.0}, {3.0, 1.0},
                          {3.0, 3.0}, {2.5, 6.3}}) {
      TaskSpec t = cfg.setup.base_task;
      t.goal = g;
      tasks.push_back(t);
    }
  } else {
    Rng task_rng = Rng::derive(cfg.seed, {0x90a1ULL});
    MetaSetup s = cfg.setup;
    s.randomize_goal_direction = true;
    tasks.push_back(sample_task(s, task_rng));
  }
  const std::vector<double> p_drops{0.0, 0.2, 0.5};
  const int repeats = scaled(full_sweep ? 5 : 10, scale);

  const auto rows = paired_episode_rows(cfg, pair, env, tasks, p_drops, repeats, parallel,
                                        mix64(cfg.seed ^ 0x5e3dULL));

  AblationResult out;
  std::vector<std::vector<std::string>> csv_rows;
  for (const EpisodeRow& r : rows) csv_rows.push_back(to_row(r));
  const auto header = episode_row_header();
  auto os = open_out(cfg.out_dir, full_sweep ? "pdrop_sweep.csv" : "rnn_vs_node.csv",
                     out.files);
  write_csv(os, header, csv_rows);

  std::ostringstream sum;
  for (double p : p_drops) {
    std::vector<double> len_node, len_rnn;
    for (const EpisodeRow& r : rows) {
      if (r.p_drop != p) continue;
      (r.model == "node" ? len_node : len_rnn).push_back(r.traj.length);
    }
    sum << "p_drop=" << fmt_double(p) << " median length node=" << fmt_double(median(len_node))
        << " rnn=" << fmt_double(median(len_rnn)) << "; ";
  }
  out.summary = sum.str();
  return out;
}

AblationResult suite_specialist_vs_prior(const ExperimentConfig& cfg_in, double scale,
                                         int parallel) {
  ExperimentConfig cfg = cfg_in.setup.variant == EnvVariant::kBeltBox
                             ? cfg_in
                             : default_config(EnvVariant::kBeltBox);
  cfg.seed = cfg_in.seed;
  cfg.out_dir = cfg_in.out_dir;
  cfg.setup.meta.seed = cfg.seed;

  // meta-learned prior
  ExperimentConfig meta_cfg = cfg;
  meta_cfg.setup.meta.parallel = parallel;
  meta_cfg.setup.meta.meta_iterations = scaled(12, scale);
  meta_cfg.setup.meta.n_envs = scaled(8, scale);
  meta_cfg.setup.meta.m_test = scaled(8, scale);
  meta_cfg.setup.meta.eval_every = 3;
  const auto proto = meta_cfg.make_prototype();
  const MetaTrainResult meta_res = meta_train(*proto, meta_cfg.setup);
  auto prior = proto->clone();
  prior->set_values(meta_res.theta_best);

  // specialist trained to convergence on the average environment
  const EnvParams avg_env = fixed_reference_env(EnvVariant::kBeltBox);
  const auto data =
      collect_random_data(cfg.setup, avg_env, scaled(6, scale), mix64(cfg.seed ^ 0x5915ULL));
  auto specialist = proto->clone();
  {
    Rng init_rng = Rng::derive(cfg.seed, {0x5e9aULL});
    specialist->set_values(
        init_params(ModelShape::node(2, cfg.model_hidden), init_rng).values);
  }
  train_offline(*specialist, data, 3e-3, scaled(2000, scale), 32, cfg.setup.train.w_l,
                mix64(cfg.seed ^ 0x0ffbULL));

  // evaluation on freshly sampled environments
  const int n_eval = scaled(60, scale);
  struct Arm {
    const DynamicsModel* model;
    std::string name;
  };
  const Arm arms[2] = {{prior.get(), "general prior"}, {specialist.get(), "specialized model"}};

  Rng env_rng = Rng::derive(cfg.seed, {0xe7e5ULL});
  Rng task_rng = Rng::derive(cfg.seed, {0x7e5cULL});
  std::vector<EpisodeSetup> eval_setups;
  for (int j = 0; j < n_eval; ++j) {
    const EnvParams env = sample_env(EnvSplit::kTest, EnvVariant::kBeltBox, env_rng);
    eval_setups.push_back(make_setup(cfg.setup, env, sample_task(cfg.setup, task_rng),
                                     mix64(cfg.seed ^ mix64(0xea1e5ULL + j))));
  }

  AblationResult out;
  std::vector<std::vector<std::string>> table;
  std::vector<std::vector<std::string>> episode_rows;
  std::ostringstream sum;
  for (const Arm& arm : arms) {
    std::vector<EpisodeReport> reports(eval_setups.size());
    parallel_for(static_cast<int>(eval_setups.size()), parallel, [&](int j) {
      reports[static_cast<std::size_t>(j)] =
          run_episode(*arm.model, eval_setups[static_cast<std::size_t>(j)]);
    });
    int solved = 0;
    double sum_t = 0.0, sum_sq = 0.0;
    int min_solved_steps = 0;
    bool any_solved = false;
    for (std::size_t j = 0; j < reports.size(); ++j) {
      const EpisodeReport& r = reports[j];
      solved += r.outcome == EpisodeStatus::kSolved ? 1 : 0;
      sum_t += r.applied_actions;
      sum_sq += static_cast<double>(r.applied_actions) * r.applied_actions;
      if (r.outcome == EpisodeStatus::kSolved &&
          (!any_solved || r.applied_actions < min_solved_steps)) {
        min_solved_steps = r.applied_actions;
        any_solved = true;
      }
      episode_rows.push_back({arm.name, std::to_string(j), outcome_name(r.outcome),
                              std::to_string(r.applied_actions)});
    }
    const double n = static_cast<double>(reports.size());
    const double mu = sum_t / n;
    const double sd = std::sqrt(std::max(0.0, sum_sq / n - mu * mu));
    table.push_back({arm.name, std::to_string(n_eval),
                     std::to_string(solved) + " (" + fmt_double(100.0 * solved / n) + "%)",
                     fmt_double(mu), fmt_double(sd),
                     any_solved ? std::to_string(min_solved_steps) : "n/a"});
    sum << arm.name << ": success " << fmt_double(100.0 * solved / n) << "%, mu_time "
        << fmt_double(mu) << ", sigma_time " << fmt_double(sd) << "; ";
  }

  const std::vector<std::string> header{"model", "n_sampled_envs", "success",
                                        "mu_time", "sigma_time", "min_time"};
  auto os = open_out(cfg.out_dir, "specialist_vs_prior.csv", out.files);
  write_csv(os, header, table);
  const std::vector<std::string> ep_header{"model", "env", "outcome", "actions"};
  auto os2 = open_out(cfg.out_dir, "specialist_vs_prior_episodes.csv", out.files);
  write_csv(os2, ep_header, episode_rows);
  out.summary = sum.str();
  return out;
}

AblationResult suite_exploration(const ExperimentConfig& cfg, double scale, int parallel) {
  ExperimentConfig c = cfg.setup.variant == EnvVariant::kUnicycleWind
                           ? cfg
                           : default_config(EnvVariant::kUnicycleWind);
  c.seed = cfg.seed;
  c.out_dir = cfg.out_dir;
  const EnvParams env = fixed_reference_env(EnvVariant::kUnicycleWind);
  const PretrainedPair pair = pretrain_models(c, env, scale, mix64(c.seed ^ 0xe89dULL),
                                              parallel);

  const int budget = scaled(c.setup.episode.h_max, scale);
  auto run_arm = [&](bool planned, OccupancyGrid& grid) {
    EpisodeSetup es = make_setup(c.setup, env, c.setup.base_task,
                                 mix64(c.seed ^ (planned ? 0x1ULL : 0x2ULL)));
    es.episode.h_max = budget;
    es.episode.pos_tolerance = 1e-9;  // no goal: run the whole budget
    es.episode.yaw_tolerance = 1e-9;
    es.exploration_grid = &grid;
    es.adapt_online = false;  // reuse the pretrained model as-is
    es.random_actions = !planned;
    return run_episode(*pair.node, es);
  };

  OccupancyGrid grid_plan({-3.0, 3.0}, {-3.0, 3.0}, 40);
  OccupancyGrid grid_rand({-3.0, 3.0}, {-3.0, 3.0}, 40);
  EpisodeReport rep_plan, rep_rand;
  parallel_for(2, parallel, [&](int i) {
    if (i == 0)
      rep_plan = run_arm(true, grid_plan);
    else
      rep_rand = run_arm(false, grid_rand);
  });

  // coverage-over-budget curves recomputed from the recorded paths
  auto coverage_curve = [](const std::vector<std::array<double, 2>>& path) {
    OccupancyGrid g({-3.0, 3.0}, {-3.0, 3.0}, 40);
    std::vector<int> curve;
    for (const auto& p : path) {
      g.visit(p[0], p[1]);
      curve.push_back(g.unique_visited());
    }
    return curve;
  };
  const auto curve_plan = coverage_curve(rep_plan.truth_path);
  const auto curve_rand = coverage_curve(rep_rand.truth_path);

  AblationResult out;
  std::vector<std::vector<std::string>> rows;
  const std::size_t n = std::min(curve_plan.size(), curve_rand.size());
  for (std::size_t i = 0; i < n; ++i)
    rows.push_back({std::to_string(i), std::to_string(curve_plan[i]),
                    std::to_string(curve_rand[i])});
  const std::vector<std::string> header{"observation", "cells_reward", "cells_random"};
  auto os = open_out(c.out_dir, "exploration_coverage.csv", out.files);
  write_csv(os, header, rows);

  std::ostringstream sum;
  sum << "exploration coverage " << grid_plan.unique_visited() << " vs random "
      << grid_rand.unique_visited() << " cells";
  out.summary = sum.str();
  return out;
}

}  // namespace

AblationResult run_ablation(const std::string& suite, const ExperimentConfig& cfg,
                            double scale, int parallel) {
  if (suite == "no-meta") return suite_no_meta(cfg, scale, parallel);
  if (suite == "rnn-vs-node") return suite_rnn_vs_node(cfg, scale, parallel, false);
  if (suite == "pdrop-sweep") return suite_rnn_vs_node(cfg, scale, parallel, true);
  if (suite == "specialist-vs-prior") return suite_specialist_vs_prior(cfg, scale, parallel);
  if (suite == "exploration") return suite_exploration(cfg, scale, parallel);
  throw ConfigError("suite", "unknown suite '" + suite + "'");
}

}  // namespace acumen
