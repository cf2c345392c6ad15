#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "acumen/config.hpp"
#include "acumen/meta.hpp"
#include "acumen/metrics.hpp"

namespace acumen {

// Random-command episodes on a fixed environment with success checking
// disabled, so every episode contributes a full budget of examples.
std::vector<TrainingExample> collect_random_data(const MetaSetup& base, const EnvParams& env,
                                                 int n_episodes, std::uint64_t seed);

// Offline training with a gentle per-step decay sized to the step budget.
FitResult train_offline(DynamicsModel& model, std::span<const TrainingExample> data,
                        double learning_rate, int steps, int batch_size, double w_l,
                        std::uint64_t seed);

// Node model plus an RNN of matched capacity, both pretrained on the same
// random-command data from `env`.
struct PretrainedPair {
  std::unique_ptr<DynamicsModel> node;
  std::unique_ptr<DynamicsModel> rnn;
  std::size_t n_examples = 0;
};
PretrainedPair pretrain_models(const ExperimentConfig& cfg, const EnvParams& env,
                               double scale, std::uint64_t seed, int parallel = 1);

void write_meta_metrics(std::ostream& os, std::span<const MetaIterationMetrics> metrics);

void write_csv(std::ostream& os, std::span<const std::string> header,
               std::span<const std::vector<std::string>> rows);

struct AblationResult {
  std::vector<std::string> files;
  std::string summary;
};

// Suites: no-meta | rnn-vs-node | specialist-vs-prior | pdrop-sweep | exploration.
// `scale` shrinks populations and budgets for quick runs; 1.0 is desk scale.
AblationResult run_ablation(const std::string& suite, const ExperimentConfig& cfg,
                            double scale, int parallel);

}  // namespace acumen
