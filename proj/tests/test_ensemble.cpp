#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "msda/ensemble.hpp"
#include "msda/errors.hpp"

using namespace msda;

namespace {

MsdaModel toy_model(int n_heads, bool pairs, std::uint64_t seed) {
  Rng rng(seed);
  return make_msda_model(2, {8, 4}, 2, n_heads, pairs, rng);
}

}  // namespace

TEST_CASE("uniform weights") {
  CHECK(uniform_weights(4).weights == std::vector<double>{0.25, 0.25, 0.25, 0.25});
  CHECK(uniform_weights(1).weights == std::vector<double>{1.0});
  CHECK_THROWS_AS(uniform_weights(0), ValueError);

  double s = 0.0;
  for (double w : uniform_weights(1000000).weights) s += w;
  CHECK(std::fabs(s - 1.0) < 1e-9);
}

TEST_CASE("accuracy weights") {
  CHECK(accuracy_weights({0.5, 0.5}).weights == std::vector<double>{0.5, 0.5});
  CHECK(accuracy_weights({0.9, 0.1}).weights == std::vector<double>{0.9, 0.1});
  const auto w = accuracy_weights({0.6, 0.2, 0.2});
  CHECK(w.weights[0] == doctest::Approx(0.6));
  CHECK(w.weights[1] == doctest::Approx(0.2));
  CHECK_THROWS_AS(accuracy_weights({0.0, 0.0}), ValueError);
  CHECK_THROWS_AS(accuracy_weights({-0.1, 0.5}), ValueError);
}

TEST_CASE("positive scaling of accuracies never changes weights or predictions") {
  const auto w1 = accuracy_weights({0.4, 0.3, 0.3});
  const auto w2 = accuracy_weights({4.0, 3.0, 3.0});  // same up to a positive factor
  for (std::size_t i = 0; i < w1.weights.size(); ++i) {
    CHECK(w1.weights[i] == doctest::Approx(w2.weights[i]).epsilon(1e-15));
  }

  const auto model = toy_model(3, false, 5);
  const Tensor batch = Tensor::matrix(6, 2, {0.1, -1, 2, 0.3, -0.5, 1, 0, 0, 1, 1, -2, 2});
  CHECK(predict(model, batch, w1) == predict(model, batch, w2));
}

TEST_CASE("predict respects one-hot weights and unanimous classifiers") {
  auto model = toy_model(3, false, 9);
  const Tensor batch = Tensor::matrix(4, 2, {1, 2, -1, 0.5, 0, -2, 3, 1});

  EnsembleWeights onehot;
  onehot.weights = {0.0, 1.0, 0.0};
  const auto via_ensemble = predict(model, batch, onehot);
  // classifier 1 alone
  const Tensor feats = forward_features(model, batch);
  const Tensor probs = softmax_rows(classify(model, 1, feats));
  for (int i = 0; i < 4; ++i) {
    const int expected = probs.at(i, 0) >= probs.at(i, 1) ? 0 : 1;
    CHECK(via_ensemble[static_cast<std::size_t>(i)] == expected);
  }

  // identical classifiers agree under every weighting
  for (std::size_t l = 0; l < model.classifiers[0].layers.size(); ++l) {
    for (int i = 1; i < 3; ++i) {
      model.classifiers[static_cast<std::size_t>(i)].layers[l].w.mutable_data() =
          model.classifiers[0].layers[l].w.data();
      model.classifiers[static_cast<std::size_t>(i)].layers[l].b.mutable_data() =
          model.classifiers[0].layers[l].b.data();
    }
  }
  const auto u = predict(model, batch, uniform_weights(3));
  EnsembleWeights skew;
  skew.weights = {0.7, 0.2, 0.1};
  CHECK(predict(model, batch, skew) == u);
}

TEST_CASE("predict hand instance: averaged pair of binary classifiers") {
  // build a 1-head "model" whose probabilities we control via logits
  // p = (0.6, 0.4), q = (0.3, 0.7), mean = (0.45, 0.55) -> class 1
  const double p[2] = {0.6, 0.4}, q[2] = {0.3, 0.7};
  std::vector<double> combined(2, 0.0);
  for (int j = 0; j < 2; ++j) combined[static_cast<std::size_t>(j)] = 0.5 * p[j] + 0.5 * q[j];
  CHECK(combined[0] == doctest::Approx(0.45));
  CHECK(combined[1] == doctest::Approx(0.55));
  CHECK((combined[1] > combined[0] ? 1 : 0) == 1);
}

TEST_CASE("weight length mismatch is rejected") {
  const auto model = toy_model(2, false, 11);
  const Tensor batch = Tensor::matrix(1, 2, {0.0, 0.0});
  EnsembleWeights w;
  w.weights = {0.5, 0.25, 0.25};
  CHECK_THROWS_AS(predict(model, batch, w), ShapeError);
}

TEST_CASE("beta model predicts with pair averages") {
  auto model = toy_model(2, true, 13);
  const Tensor batch = Tensor::matrix(5, 2, {1, 0, -1, 2, 0.5, 0.5, -2, -2, 3, 0});

  const auto direct = predict(model, batch, uniform_weights(2));

  // manual pair-average-then-uniform reference
  const Tensor feats = forward_features(model, batch);
  std::vector<double> combined(10, 0.0);
  for (int i = 0; i < 2; ++i) {
    const Tensor a = softmax_rows(classify(model, i, feats));
    const Tensor b = softmax_rows(classify_paired(model, i, feats));
    for (std::size_t t = 0; t < combined.size(); ++t) {
      combined[t] += 0.5 * (0.5 * (a.data()[t] + b.data()[t]));
    }
  }
  for (int i = 0; i < 5; ++i) {
    const int expected = combined[static_cast<std::size_t>(i) * 2] >=
                                 combined[static_cast<std::size_t>(i) * 2 + 1]
                             ? 0
                             : 1;
    CHECK(direct[static_cast<std::size_t>(i)] == expected);
  }
}

TEST_CASE("evaluate produces a consistent report") {
  const auto task = standardize(gen_blobs(3, 2, 40, 1.0, 0.1, 15));
  Rng rng(17);
  auto model = make_msda_model(2, {8, 4}, 2, 2, false, rng);
  const auto report = evaluate(model, task.target, uniform_schema(2));

  CHECK(report.n_samples == task.target.n_samples());
  int trace_sum = 0, total = 0;
  for (std::size_t i = 0; i < report.confusion.size(); ++i) {
    for (std::size_t j = 0; j < report.confusion[i].size(); ++j) {
      total += report.confusion[i][j];
      if (i == j) trace_sum += report.confusion[i][j];
    }
  }
  CHECK(total == report.n_samples);
  CHECK(report.accuracy ==
        doctest::Approx(static_cast<double>(trace_sum) / report.n_samples));

  // rows sum to per-class counts
  std::vector<int> class_counts(2, 0);
  for (int y : task.target.labels) ++class_counts[static_cast<std::size_t>(y)];
  for (std::size_t k = 0; k < 2; ++k) {
    int row = 0;
    for (int v : report.confusion[k]) row += v;
    CHECK(row == class_counts[k]);
  }

  const auto text = to_json_string(report);
  const auto doc = nlohmann::json::parse(text);
  CHECK(doc.at("schema") == "uniform");
  CHECK(doc.at("weights").size() == 2);
  CHECK(doc.at("confusion").size() == 2);
}

TEST_CASE("inverse moment weights favor the closer source") {
  FeatureMatrix near, far, target;
  near.rows = far.rows = target.rows = 4;
  near.cols = far.cols = target.cols = 1;
  target.v = {0.0, 0.1, -0.1, 0.05};
  near.v = {0.02, 0.12, -0.08, 0.03};
  far.v = {5.0, 5.1, 4.9, 5.05};
  const auto w = inverse_moment_weights({near, far}, target);
  CHECK(w.weights[0] > 0.9);
  CHECK(w.weights[0] + w.weights[1] == doctest::Approx(1.0));
}
