#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "acumen/checkpoint.hpp"
#include "acumen/config.hpp"
#include "acumen/errors.hpp"
#include "acumen/harness.hpp"
#include "acumen/metrics.hpp"
#include "acumen/num_io.hpp"
#include "acumen/selftest.hpp"

namespace {

using namespace acumen;

struct CommonOpts {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int parallel = 1;
};

ExperimentConfig load_with_overrides(const std::string& path, const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(path);
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.setup.meta.seed = *opts.seed;
  }
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  cfg.setup.meta.parallel = opts.parallel;
  return cfg;
}

int cmd_train_meta(const std::string& config_path, const CommonOpts& opts) {
  const ExperimentConfig cfg = load_with_overrides(config_path, opts);
  const auto proto = cfg.make_prototype();
  const MetaTrainResult res = meta_train(*proto, cfg.setup);

  std::filesystem::create_directories(cfg.out_dir);
  {
    std::ofstream os(cfg.out_dir + "/metrics.jsonl", std::ios::binary);
    write_meta_metrics(os, res.metrics);
  }
  ModelParams best = proto->params();
  best.values = res.theta_best;
  save_checkpoint(cfg.out_dir + "/prior_best.ckpt", best);
  ModelParams last = proto->params();
  last.values = res.theta_last;
  save_checkpoint(cfg.out_dir + "/prior_last.ckpt", last);

  std::cout << "meta-training done: " << res.metrics.size() << " iterations, best held-out "
            << fmt_double(res.best_test_pct) << "% (iteration " << res.best_iteration
            << ")\n"
            << "wrote " << cfg.out_dir << "/metrics.jsonl, prior_best.ckpt, prior_last.ckpt\n";
  return 0;
}

int cmd_run_episode(const std::string& config_path, const CommonOpts& opts,
                    const std::string& checkpoint_path) {
  const ExperimentConfig cfg = load_with_overrides(config_path, opts);
  auto proto = cfg.make_prototype();
  if (!checkpoint_path.empty()) {
    const ModelParams loaded = load_checkpoint(checkpoint_path);
    proto->set_values(loaded.values);
  }

  Rng env_rng = Rng::derive(cfg.seed, {0xe4ULL});
  Rng task_rng = Rng::derive(cfg.seed, {0x7aULL});
  EpisodeSetup es;
  es.env = sample_env(EnvSplit::kTrain, cfg.setup.variant, env_rng, cfg.setup.n_directions);
  es.task = sample_task(cfg.setup, task_rng);
  es.episode = cfg.setup.episode;
  es.irregularity = cfg.setup.irregularity;
  es.planner = cfg.setup.planner;
  es.train = cfg.setup.train;
  es.r_split = cfg.setup.meta.r_split;
  es.seed = cfg.seed;
  const EpisodeReport rep = run_episode(*proto, es);

  std::filesystem::create_directories(cfg.out_dir);
  const std::string log_path = cfg.out_dir + "/eventlog.txt";
  {
    std::ofstream os(log_path, std::ios::binary);
    write_event_log(os, rep.events);
  }
  const TrajectoryMetrics tm = traj_metrics(rep.truth_path);
  std::cout << "outcome " << (rep.outcome == EpisodeStatus::kSolved ? "solved" : "timeout")
            << ", actions " << rep.applied_actions << ", length " << fmt_double(tm.length)
            << ", irregularity " << fmt_double(tm.irregularity) << "\n"
            << "wrote " << log_path << "\n";
  if (!rep.diagnostic.empty()) std::cout << "diagnostic: " << rep.diagnostic << "\n";
  return 0;
}

int cmd_ablate(const std::string& suite, const std::string& config_path,
               const CommonOpts& opts, double scale) {
  const ExperimentConfig cfg = load_with_overrides(config_path, opts);
  const AblationResult res = run_ablation(suite, cfg, scale, opts.parallel);
  for (const std::string& f : res.files) std::cout << "wrote " << f << "\n";
  std::cout << res.summary << "\n";
  return 0;
}

int cmd_metrics(const std::string& log_path) {
  std::ifstream is(log_path);
  if (!is) throw ConfigError("<file>", "cannot open '" + log_path + "'");
  const auto events = read_event_log(is);
  std::vector<std::array<double, 2>> positions;
  int actions = 0;
  for (const TimedEvent& e : events) {
    if (e.kind == TimedEvent::Kind::kObservation)
      positions.push_back({e.payload[0], e.payload[1]});
    else
      ++actions;
  }
  const TrajectoryMetrics tm = traj_metrics(positions);
  std::cout << "observations " << positions.size() << "\n"
            << "applied_actions " << actions << "\n"
            << "length " << fmt_double(tm.length) << "\n"
            << "irregularity " << fmt_double(tm.irregularity) << "\n";
  return 0;
}

int cmd_check() {
  const auto results = run_selftests();
  bool all = true;
  for (const SelfTestResult& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " — " << r.detail << "\n";
    all = all && r.pass;
  }
  std::cout << (all ? "all checks passed\n" : "some checks FAILED\n");
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned neural-ODE control laboratory"};
  app.require_subcommand(1);

  CommonOpts opts;
  app.add_option("--seed", opts.seed, "Override the config seed");
  app.add_option("--out-dir", opts.out_dir, "Override the output directory");
  app.add_option("--parallel", opts.parallel, "Worker threads for episode fan-out")
      ->check(CLI::PositiveNumber);

  std::string config_path, suite, log_path, checkpoint_path;
  double scale = 1.0;

  auto* train = app.add_subcommand("train-meta", "Run the meta-training loop");
  train->add_option("config", config_path, "Experiment config (JSON)")->required();

  auto* episode = app.add_subcommand("run-episode", "Run a single seeded episode");
  episode->add_option("config", config_path, "Experiment config (JSON)")->required();
  episode->add_option("--checkpoint", checkpoint_path, "Start from a saved prior");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation suite");
  ablate->add_option("suite", suite,
                     "no-meta | rnn-vs-node | specialist-vs-prior | pdrop-sweep | exploration")
      ->required();
  ablate->add_option("config", config_path, "Experiment config (JSON)")->required();
  ablate->add_option("--scale", scale, "Shrink populations/budgets by this factor")
      ->check(CLI::PositiveNumber);

  auto* metrics = app.add_subcommand("metrics", "Trajectory metrics from an event log");
  metrics->add_option("eventlog", log_path, "Exported event log")->required();

  app.add_subcommand("check", "Run the built-in invariant battery");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("train-meta")) return cmd_train_meta(config_path, opts);
    if (app.got_subcommand("run-episode"))
      return cmd_run_episode(config_path, opts, checkpoint_path);
    if (app.got_subcommand("ablate")) return cmd_ablate(suite, config_path, opts, scale);
    if (app.got_subcommand("metrics")) return cmd_metrics(log_path);
    if (app.got_subcommand("check")) return cmd_check();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
