#pragma once

#include <string>
#include <vector>

#include "msda/data.hpp"
#include "msda/model.hpp"

namespace msda {

struct EnsembleWeights {
  std::vector<double> weights;  // non-negative, sums to 1
};

EnsembleWeights uniform_weights(int n);

// w_i = acc_i / sum_j acc_j; throws on an all-zero accuracy vector so the
// caller can fall back to uniform.
EnsembleWeights accuracy_weights(const std::vector<double>& source_only_accs);

// Label-free alternative: w_i proportional to 1 / d_CM^1(source_i, target).
EnsembleWeights inverse_moment_weights(const std::vector<FeatureMatrix>& sources,
                                       const FeatureMatrix& target);

// Named weighting recipe applied at prediction time.
struct EnsembleSchema {
  std::string name;  // "uniform" | "accuracy_weighted" | "inverse_moment"
  EnsembleWeights weights;
  std::vector<double> source_only_accs;  // recorded for accuracy weighting
  bool transductive = false;  // weights derived from labeled target data
};

EnsembleSchema uniform_schema(int n_heads);

// Weighted average of per-head softmax outputs; pairs are averaged within a
// domain first. Ties resolve to the lowest class index.
std::vector<int> predict(const MsdaModel& model, const Tensor& batch,
                         const EnsembleWeights& w);

struct EvalReport {
  std::string schema;
  std::vector<double> weights;
  double accuracy = 0.0;
  std::vector<double> per_class;
  std::vector<std::vector<int>> confusion;  // rows: true class
  std::vector<double> source_only_accs;
  bool transductive = false;
  int n_samples = 0;
};

EvalReport evaluate(const MsdaModel& model, const DomainDataset& ds,
                    const EnsembleSchema& schema);

std::string to_json_string(const EvalReport& report);

}  // namespace msda
