#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msda/data.hpp"
#include "msda/ensemble.hpp"
#include "msda/trainer.hpp"

namespace msda {

struct DataConfig {
  std::string scenario = "blobs";  // blobs | moons | csv
  int domains = 3;
  int classes = 3;
  int per_class = 100;
  double shift_scale = 2.0;
  double rot_scale = 0.2;
  std::vector<std::string> sources;  // csv scenario
  std::string target;                // csv scenario
  bool standardize = true;
};

struct ModelConfig {
  std::vector<int> hidden = {16, 8};
};

struct EnsembleConfig {
  std::string weighting = "accuracy";  // accuracy | inverse_moment
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EnsembleConfig ensemble;
};

// Strict parser: unknown keys anywhere are a config error; seed is required.
ExperimentConfig experiment_config_from_json_string(const std::string& text);

struct ExperimentResult {
  TrainTrace trace;
  MsdaModel model;
  EvalReport eval_uniform;
  EvalReport eval_weighted;
};

// Builds the task, standardizes on pooled sources, holds out 30% of the
// target for labeled evaluation, trains, and evaluates both ensemble
// schemas. The weighted schema trains one single-source snapshot per source
// to measure its accuracy on the evaluation split.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

MsdaTask build_task(const DataConfig& cfg, std::uint64_t seed);

// Metrics document written by the train command.
std::string metrics_json_string(const ExperimentConfig& cfg, const ExperimentResult& result);

}  // namespace msda
