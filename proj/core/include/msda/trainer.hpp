#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "msda/data.hpp"
#include "msda/model.hpp"
#include "msda/moments.hpp"

namespace msda {

enum class Algorithm {
  kSourceOnly,
  kSourceCombine,
  kM3sda,
  kM3sdaBeta,
  kSsOnly,
  kStOnly,
};

Algorithm algorithm_from_string(const std::string& name);
std::string algorithm_name(Algorithm algo);

struct TrainConfig {
  Algorithm algorithm = Algorithm::kM3sda;
  double lambda = 0.5;
  int epochs = 40;
  int batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  int g_steps_per_cycle = 1;
  std::uint64_t seed = 0;
  MomentConfig moment_cfg;
  DiscrepancyReduction discrepancy_reduction = DiscrepancyReduction::kMean;
};

// One record per epoch; record 0 holds pre-training diagnostics. All
// diagnostics are full-data epoch-end evaluations, so traces are
// bit-reproducible for a fixed seed and config.
struct TrainTrace {
  std::vector<int> epochs;
  std::vector<double> md;
  std::map<std::string, std::vector<double>> train_err;  // "C1".., "C1p"..
  std::map<std::string, std::vector<double>> disc;       // per pair, beta only
  std::vector<double> target_acc;
};

std::string to_json_string(const TrainTrace& trace);

// SGD with momentum: v = mu*v + g; p -= lr*v.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor> params, double lr, double momentum);
  void step();
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double lr_;
  double momentum_;
};

// Observation points inside one optimization cycle. For the classifier-pair
// algorithm the phases are i (main), ii (heads only), iii (extractor only);
// other algorithms only emit kMain.
enum class TrainPhase { kMain, kHeadsOnly, kExtractorOnly };

struct TrainHooks {
  std::function<void(int epoch, int step, TrainPhase phase)> after_phase;
};

// Unified entry point; dispatches on cfg.algorithm. eval_ds supplies the
// labeled target split used for the accuracy trace.
TrainTrace train(const MsdaTask& task, MsdaModel& model, const TrainConfig& cfg,
                 const DomainDataset& eval_ds, const TrainHooks* hooks = nullptr);

// Spec'd per-algorithm wrappers; accuracy trace uses task.target.
TrainTrace train_source_only(const MsdaTask& task, MsdaModel& model, const TrainConfig& cfg);
TrainTrace train_m3sda(const MsdaTask& task, MsdaModel& model, const TrainConfig& cfg);
TrainTrace train_m3sda_beta(const MsdaTask& task, MsdaModel& model, const TrainConfig& cfg);
TrainTrace train_ablation(const MsdaTask& task, MsdaModel& model, const TrainConfig& cfg);
TrainTrace train_source_combine(const MsdaTask& task, MsdaModel& model, const TrainConfig& cfg);

// Pools all sources into one labeled domain (concatenated in order).
MsdaTask combine_sources(const MsdaTask& task);

// Deterministic batch schedule: one reshuffled permutation per dataset per
// epoch, sliced cyclically. Keyed by (seed, epoch, n) so equal-sized
// datasets share a schedule.
std::vector<int> epoch_permutation(std::uint64_t seed, int epoch, int n);
std::vector<int> batch_indices(const std::vector<int>& perm, int step, int batch_size);

}  // namespace msda
