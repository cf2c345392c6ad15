#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "acumen/meta.hpp"
#include "acumen/model.hpp"

namespace acumen {

// Full experiment description as read from a config file. Unknown keys are
// rejected with their path so configs stay exact provenance records.
struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  ModelKind model_kind = ModelKind::kNode;
  std::vector<int> model_hidden{32, 32};
  SolverSpec solver = SolverSpec::rk4(4);

  MetaSetup setup;

  // Prototype model with seeded random initialization.
  std::unique_ptr<DynamicsModel> make_prototype() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Paper-flavoured defaults for either environment variant, used as the base
// when a config omits sections and by the built-in experiment presets.
ExperimentConfig default_config(EnvVariant variant);

}  // namespace acumen
