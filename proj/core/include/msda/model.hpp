#pragma once

#include <string>
#include <vector>

#include "msda/rng.hpp"
#include "msda/tensor.hpp"

namespace msda {

// Fully connected stack; relu between layers, logits at the output.
struct MlpSpec {
  std::vector<int> layer_widths;  // input -> hidden... -> output
};

struct LinearLayer {
  Tensor w;  // [in x out]
  Tensor b;  // [out]
};

struct Mlp {
  std::vector<int> widths;
  std::vector<LinearLayer> layers;

  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> params() const;
  int in_width() const { return widths.front(); }
  int out_width() const { return widths.back(); }
};

// Glorot-uniform weights, zero biases.
Mlp make_mlp(const MlpSpec& spec, Rng& rng);

enum class DiscrepancyReduction { kMean, kSum };

// Shared feature extractor G plus N classifier heads; paired heads present
// only for the classifier-discrepancy algorithm.
struct MsdaModel {
  Mlp g;
  std::vector<Mlp> classifiers;
  std::vector<Mlp> paired_classifiers;
  int n_classes = 0;

  int n_heads() const { return static_cast<int>(classifiers.size()); }
  bool has_pairs() const { return !paired_classifiers.empty(); }
  int feature_width() const { return g.out_width(); }
  std::vector<Tensor> g_params() const { return g.params(); }
  std::vector<Tensor> head_params() const;  // classifiers then paired
  std::vector<Tensor> all_params() const;
};

// hidden = widths of G after the input (e.g. {16, 8}); each head is one
// linear layer from feature width to n_classes. Paired heads get their own
// independent draws.
MsdaModel make_msda_model(int in_width, const std::vector<int>& hidden, int n_classes,
                          int n_heads, bool with_pairs, Rng& rng);

Tensor forward_features(const MsdaModel& model, const Tensor& batch);
Tensor classify(const MsdaModel& model, int head_index, const Tensor& features);
Tensor classify_paired(const MsdaModel& model, int head_index, const Tensor& features);

// Mean (or sum) over batch and classes of |p - p_prime|; inputs must be
// softmax outputs.
Tensor discrepancy(const Tensor& p, const Tensor& p_prime,
                   DiscrepancyReduction reduction = DiscrepancyReduction::kMean);

// Checkpoint round-trip (JSON, fixed field order).
std::string to_json_string(const MsdaModel& model);
MsdaModel model_from_json_string(const std::string& text);

}  // namespace msda
