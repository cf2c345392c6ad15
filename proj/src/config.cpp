#include "acumen/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "acumen/errors.hpp"

namespace acumen {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(path + "." + key, "unknown key");
  }
}

template <class T>
T get_or(const json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key, "wrong type");
  }
}

EnvVariant parse_variant(const std::string& s, const std::string& path) {
  if (s == "unicycle-wind") return EnvVariant::kUnicycleWind;
  if (s == "belt-box") return EnvVariant::kBeltBox;
  throw ConfigError(path, "unknown variant '" + s + "'");
}

void apply_model(const json& j, const std::string& path, ExperimentConfig& cfg) {
  check_keys(j, path, {"kind", "hidden", "solver"});
  const std::string kind = get_or<std::string>(j, path, "kind", "node");
  if (kind == "node")
    cfg.model_kind = ModelKind::kNode;
  else if (kind == "rnn")
    cfg.model_kind = ModelKind::kRnn;
  else
    throw ConfigError(path + ".kind", "unknown model kind '" + kind + "'");
  cfg.model_hidden = get_or<std::vector<int>>(j, path, "hidden", cfg.model_hidden);
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    const std::string spath = path + ".solver";
    check_keys(s, spath, {"kind", "n_steps", "rtol", "atol"});
    const std::string sk = get_or<std::string>(s, spath, "kind", "rk4");
    if (sk == "rk4") {
      cfg.solver = SolverSpec::rk4(get_or<int>(s, spath, "n_steps", 4));
    } else if (sk == "dopri") {
      cfg.solver = SolverSpec::dopri(get_or<double>(s, spath, "rtol", 1e-6),
                                     get_or<double>(s, spath, "atol", 1e-8));
    } else {
      throw ConfigError(spath + ".kind", "unknown solver '" + sk + "'");
    }
  }
}

void apply_episode(const json& j, const std::string& path, EpisodeConfig& e) {
  check_keys(j, path,
             {"h_max", "apply_horizon", "window_size", "pos_tolerance", "yaw_tolerance",
              "obs_rate_hz", "cmd_period", "truth_substeps"});
  e.h_max = get_or<int>(j, path, "h_max", e.h_max);
  e.apply_horizon = get_or<int>(j, path, "apply_horizon", e.apply_horizon);
  e.window_size = get_or<int>(j, path, "window_size", e.window_size);
  e.pos_tolerance = get_or<double>(j, path, "pos_tolerance", e.pos_tolerance);
  e.yaw_tolerance = get_or<double>(j, path, "yaw_tolerance", e.yaw_tolerance);
  e.obs_rate_hz = get_or<double>(j, path, "obs_rate_hz", e.obs_rate_hz);
  e.cmd_period = get_or<double>(j, path, "cmd_period", e.cmd_period);
  e.truth_substeps = get_or<int>(j, path, "truth_substeps", e.truth_substeps);
}

void apply_irregularity(const json& j, const std::string& path, IrregularityConfig& c) {
  check_keys(j, path, {"k_s", "eta", "p_drop", "action_time_jitter"});
  c.k_s = get_or<int>(j, path, "k_s", c.k_s);
  c.eta = get_or<double>(j, path, "eta", c.eta);
  c.p_drop = get_or<double>(j, path, "p_drop", c.p_drop);
  c.action_time_jitter = get_or<bool>(j, path, "action_time_jitter", c.action_time_jitter);
}

void apply_planner(const json& j, const std::string& path, PlannerConfig& p) {
  check_keys(j, path,
             {"mode", "n_population", "n_elites", "horizon", "noise_beta", "mu0", "sigma0",
              "max_iterations", "sigma_floor", "keep_elites", "sigma_smoothing",
              "discrete_values", "plan_duration"});
  if (j.contains("mode")) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "cem")
      p.mode = PlannerMode::kCem;
    else if (mode == "random-shoot")
      p.mode = PlannerMode::kRandomShoot;
    else
      throw ConfigError(path + ".mode", "unknown planner mode '" + mode + "'");
  }
  p.n_population = get_or<int>(j, path, "n_population", p.n_population);
  p.n_elites = get_or<int>(j, path, "n_elites", p.n_elites);
  p.horizon = get_or<int>(j, path, "horizon", p.horizon);
  p.noise_beta = get_or<double>(j, path, "noise_beta", p.noise_beta);
  p.mu0 = get_or<std::vector<double>>(j, path, "mu0", p.mu0);
  p.sigma0 = get_or<std::vector<double>>(j, path, "sigma0", p.sigma0);
  p.max_iterations = get_or<int>(j, path, "max_iterations", p.max_iterations);
  p.sigma_floor = get_or<double>(j, path, "sigma_floor", p.sigma_floor);
  p.keep_elites = get_or<bool>(j, path, "keep_elites", p.keep_elites);
  p.sigma_smoothing = get_or<double>(j, path, "sigma_smoothing", p.sigma_smoothing);
  p.discrete_values =
      get_or<std::vector<std::vector<double>>>(j, path, "discrete_values", p.discrete_values);
  p.plan_duration = get_or<double>(j, path, "plan_duration", p.plan_duration);
}

void apply_train(const json& j, const std::string& path, TrainConfig& t) {
  check_keys(j, path,
             {"learning_rate", "lr_decay", "w_l", "n_iterations", "batch_size", "train_freq"});
  t.learning_rate = get_or<double>(j, path, "learning_rate", t.learning_rate);
  t.lr_decay = get_or<double>(j, path, "lr_decay", t.lr_decay);
  t.w_l = get_or<double>(j, path, "w_l", t.w_l);
  t.n_iterations = get_or<int>(j, path, "n_iterations", t.n_iterations);
  t.batch_size = get_or<int>(j, path, "batch_size", t.batch_size);
  t.train_freq = get_or<int>(j, path, "train_freq", t.train_freq);
}

void apply_meta(const json& j, const std::string& path, MetaConfig& m) {
  check_keys(j, path,
             {"n_envs", "alpha", "sigma", "r_split", "meta_iterations", "m_test",
              "eval_every", "antithetic"});
  m.n_envs = get_or<int>(j, path, "n_envs", m.n_envs);
  m.alpha = get_or<double>(j, path, "alpha", m.alpha);
  m.sigma = get_or<double>(j, path, "sigma", m.sigma);
  m.r_split = get_or<double>(j, path, "r_split", m.r_split);
  m.meta_iterations = get_or<int>(j, path, "meta_iterations", m.meta_iterations);
  m.m_test = get_or<int>(j, path, "m_test", m.m_test);
  m.eval_every = get_or<int>(j, path, "eval_every", m.eval_every);
  m.antithetic = get_or<bool>(j, path, "antithetic", m.antithetic);
}

void apply_task(const json& j, const std::string& path, MetaSetup& s) {
  check_keys(j, path,
             {"goal", "target_yaw", "randomize_goal_direction", "goal_cone_deg",
              "initial_pose_noise"});
  const auto goal = get_or<std::vector<double>>(
      j, path, "goal", {s.base_task.goal[0], s.base_task.goal[1]});
  if (goal.size() != 2) throw ConfigError(path + ".goal", "expected 2 numbers");
  s.base_task.goal = {goal[0], goal[1]};
  s.base_task.target_yaw = get_or<double>(j, path, "target_yaw", s.base_task.target_yaw);
  s.randomize_goal_direction =
      get_or<bool>(j, path, "randomize_goal_direction", s.randomize_goal_direction);
  if (j.contains("goal_cone_deg"))
    s.goal_cone_rad =
        j.at("goal_cone_deg").get<double>() * std::numbers::pi / 180.0;
  s.initial_pose_noise =
      get_or<double>(j, path, "initial_pose_noise", s.initial_pose_noise);
}

}  // namespace

ExperimentConfig default_config(EnvVariant variant) {
  ExperimentConfig cfg;
  MetaSetup& s = cfg.setup;
  s.variant = variant;
  if (variant == EnvVariant::kUnicycleWind) {
    cfg.model_hidden = {32, 32};
    cfg.solver = SolverSpec::rk4(4);
    s.base_task.goal = {1.0, 0.0};
    s.randomize_goal_direction = true;
    s.goal_cone_rad = std::numbers::pi / 6.0;  // frontal goals at desk scale
    s.episode.h_max = 150;
    s.episode.pos_tolerance = 0.1;
    s.episode.obs_rate_hz = 6.0;
    s.episode.cmd_period = 0.2;
    s.irregularity.k_s = 1;
    s.irregularity.p_drop = 0.0;
    s.irregularity.action_time_jitter = true;
    s.planner.mode = PlannerMode::kRandomShoot;
    s.planner.n_population = 21;
    s.planner.horizon = 1;
    s.planner.noise_beta = 0.0;
    s.planner.discrete_values = {{-0.1, -0.05, -0.01, 0.0, 0.01, 0.05, 0.1},
                                 {-0.1, 0.0, 0.1}};
    s.planner.plan_duration = 1.0;  // lookahead; commands still go out every cmd_period
    s.train.learning_rate = 1e-4;
    s.train.lr_decay = 0.99;
    s.train.w_l = 1.0;
    s.train.n_iterations = 1;
    s.train.train_freq = 5;
    s.train.batch_size = 16;
    s.meta.alpha = 5e-5;
    s.meta.sigma = 5e-3;
  } else {
    cfg.model_hidden = {32, 32};
    cfg.solver = SolverSpec::rk4(6);
    s.base_task.target_yaw = std::numbers::pi / 2;
    s.initial_pose_noise = 0.02;
    s.episode.h_max = 300;
    s.episode.pos_tolerance = 0.3;
    s.episode.yaw_tolerance = 0.1;
    s.episode.obs_rate_hz = 6.0;
    s.episode.cmd_period = 0.2;
    s.irregularity.k_s = 3;
    s.irregularity.eta = 0.05;
    s.irregularity.action_time_jitter = true;
    s.planner.mode = PlannerMode::kCem;
    s.planner.n_population = 20;
    s.planner.n_elites = 5;
    s.planner.horizon = 4;
    s.planner.noise_beta = 2.0;
    s.planner.mu0 = {0.0, 0.0};
    s.planner.sigma0 = {1.0, 1.0};
    s.planner.max_iterations = 3;
    s.planner.plan_duration = 0.8;  // H regular intervals at the command period
    s.train.learning_rate = 5e-4;
    s.train.lr_decay = 0.9;
    s.train.w_l = 10.0;
    s.train.n_iterations = 10;
    s.train.train_freq = 5;
    s.train.batch_size = 16;
    s.meta.alpha = 5e-4;
    s.meta.sigma = 1e-2;
  }
  s.meta.r_split = 0.75;
  s.meta.n_envs = 8;
  s.meta.meta_iterations = 15;
  s.meta.m_test = 20;
  return cfg;
}

std::unique_ptr<DynamicsModel> ExperimentConfig::make_prototype() const {
  Rng rng = Rng::derive(seed, {0x90deULL});
  const int action_dim = 2;
  if (model_kind == ModelKind::kNode) {
    return std::make_unique<NodeModel>(init_params(ModelShape::node(action_dim, model_hidden), rng),
                                       solver);
  }
  return std::make_unique<RnnModel>(init_params(ModelShape::rnn(action_dim, model_hidden), rng));
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  check_keys(j, "<root>",
             {"schema_version", "variant", "seed", "out_dir", "model", "episode",
              "irregularity", "planner", "train", "meta", "task", "wind_directions"});

  const int version = get_or<int>(j, "<root>", "schema_version", 1);
  if (version != 1)
    throw ConfigError("schema_version", "unsupported version " + std::to_string(version));

  const std::string variant_name =
      get_or<std::string>(j, "<root>", "variant", "unicycle-wind");
  ExperimentConfig cfg = default_config(parse_variant(variant_name, "variant"));
  cfg.schema_version = version;
  cfg.seed = get_or<std::uint64_t>(j, "<root>", "seed", cfg.seed);
  cfg.out_dir = get_or<std::string>(j, "<root>", "out_dir", cfg.out_dir);
  cfg.setup.n_directions = get_or<int>(j, "<root>", "wind_directions", cfg.setup.n_directions);
  cfg.setup.meta.seed = cfg.seed;

  if (j.contains("model")) apply_model(j.at("model"), "model", cfg);
  if (j.contains("episode")) apply_episode(j.at("episode"), "episode", cfg.setup.episode);
  if (j.contains("irregularity"))
    apply_irregularity(j.at("irregularity"), "irregularity", cfg.setup.irregularity);
  if (j.contains("planner")) apply_planner(j.at("planner"), "planner", cfg.setup.planner);
  if (j.contains("train")) apply_train(j.at("train"), "train", cfg.setup.train);
  if (j.contains("meta")) apply_meta(j.at("meta"), "meta", cfg.setup.meta);
  if (j.contains("task")) apply_task(j.at("task"), "task", cfg.setup);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("<file>", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace acumen
