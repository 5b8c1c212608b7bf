#include "msda/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "msda/errors.hpp"
#include "msda/moments.hpp"
#include "vendor_json.hpp"

namespace msda {

namespace {

void check_simplex(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) {
    if (v < 0.0) throw ValueError("ensemble weights must be non-negative");
    s += v;
  }
  if (std::fabs(s - 1.0) > 1e-9) throw ValueError("ensemble weights must sum to 1");
}

}  // namespace

EnsembleWeights uniform_weights(int n) {
  if (n < 1) throw ValueError("uniform_weights: n must be >= 1");
  EnsembleWeights w;
  w.weights.assign(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
  return w;
}

EnsembleWeights accuracy_weights(const std::vector<double>& source_only_accs) {
  if (source_only_accs.empty()) throw ValueError("accuracy_weights: empty accuracy vector");
  double s = 0.0;
  for (double a : source_only_accs) {
    if (a < 0.0) throw ValueError("accuracy_weights: accuracies must be >= 0");
    s += a;
  }
  if (s <= 0.0) throw ValueError("accuracy_weights: all accuracies are zero");
  EnsembleWeights w;
  w.weights.reserve(source_only_accs.size());
  for (double a : source_only_accs) w.weights.push_back(a / s);
  return w;
}

EnsembleWeights inverse_moment_weights(const std::vector<FeatureMatrix>& sources,
                                       const FeatureMatrix& target) {
  if (sources.empty()) throw ValueError("inverse_moment_weights: no sources");
  std::vector<double> inv;
  inv.reserve(sources.size());
  for (const auto& s : sources) {
    const double d = cross_moment_divergence(s, target, 1);
    inv.push_back(1.0 / std::max(d, 1e-12));
  }
  double total = 0.0;
  for (double v : inv) total += v;
  EnsembleWeights w;
  for (double v : inv) w.weights.push_back(v / total);
  return w;
}

EnsembleSchema uniform_schema(int n_heads) {
  EnsembleSchema schema;
  schema.name = "uniform";
  schema.weights = uniform_weights(n_heads);
  return schema;
}

std::vector<int> predict(const MsdaModel& model, const Tensor& batch,
                         const EnsembleWeights& w) {
  if (static_cast<int>(w.weights.size()) != model.n_heads()) {
    throw ShapeError("predict: weight count does not match classifier count");
  }
  check_simplex(w.weights);

  const Tensor feats = forward_features(model, batch);
  const int b = feats.rows();
  const int c = model.n_classes;
  std::vector<double> combined(static_cast<std::size_t>(b) * c, 0.0);
  for (int i = 0; i < model.n_heads(); ++i) {
    Tensor probs = softmax_rows(classify(model, i, feats));
    if (model.has_pairs()) {
      // Each domain votes with the average of its pair.
      Tensor paired = softmax_rows(classify_paired(model, i, feats));
      probs = 0.5 * add(probs, paired);
    }
    const double wi = w.weights[static_cast<std::size_t>(i)];
    const auto& pv = probs.data();
    for (std::size_t t = 0; t < combined.size(); ++t) combined[t] += wi * pv[t];
  }

  std::vector<int> labels(static_cast<std::size_t>(b), 0);
  for (int i = 0; i < b; ++i) {
    int best = 0;
    double best_v = combined[static_cast<std::size_t>(i) * c];
    for (int j = 1; j < c; ++j) {
      const double v = combined[static_cast<std::size_t>(i) * c + j];
      if (v > best_v) {  // strict: ties keep the lowest class index
        best_v = v;
        best = j;
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

EvalReport evaluate(const MsdaModel& model, const DomainDataset& ds,
                    const EnsembleSchema& schema) {
  validate_dataset(ds);
  if (ds.n_classes != model.n_classes) {
    throw ConfigError("evaluate: dataset and model disagree on class count");
  }
  const auto pred = predict(model, features_tensor(ds), schema.weights);

  EvalReport report;
  report.schema = schema.name;
  report.weights = schema.weights.weights;
  report.source_only_accs = schema.source_only_accs;
  report.transductive = schema.transductive;
  report.n_samples = ds.n_samples();
  const int c = ds.n_classes;
  report.confusion.assign(static_cast<std::size_t>(c),
                          std::vector<int>(static_cast<std::size_t>(c), 0));
  int correct = 0;
  for (int i = 0; i < ds.n_samples(); ++i) {
    const int y = ds.labels[static_cast<std::size_t>(i)];
    const int p = pred[static_cast<std::size_t>(i)];
    ++report.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
    if (y == p) ++correct;
  }
  report.accuracy = static_cast<double>(correct) / ds.n_samples();
  for (int k = 0; k < c; ++k) {
    int row_total = 0;
    for (int j = 0; j < c; ++j) row_total += report.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    report.per_class.push_back(
        row_total == 0
            ? 0.0
            : static_cast<double>(report.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)]) / row_total);
  }
  return report;
}

std::string to_json_string(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["schema"] = report.schema;
  doc["weights"] = report.weights;
  doc["accuracy"] = report.accuracy;
  doc["per_class"] = report.per_class;
  doc["confusion"] = report.confusion;
  doc["n_samples"] = report.n_samples;
  if (!report.source_only_accs.empty()) {
    doc["source_only_accs"] = report.source_only_accs;
    doc["transductive_weighting"] = report.transductive;
  }
  return doc.dump(2) + "\n";
}

}  // namespace msda
