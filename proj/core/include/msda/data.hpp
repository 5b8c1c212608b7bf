#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "msda/tensor.hpp"

namespace msda {

// Row-major sample matrix (no gradient machinery).
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }
  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
};

// Labeled sample set for one domain.
struct DomainDataset {
  std::string name;
  FeatureMatrix features;
  std::vector<int> labels;
  int n_classes = 0;

  int n_samples() const { return features.rows; }
  int n_features() const { return features.cols; }
};

// Throws if labels are out of range, the dataset is empty, or any feature
// value is non-finite.
void validate_dataset(const DomainDataset& ds);

// N labeled sources plus one target; target labels are carried for
// evaluation only and must never reach a training loss.
struct MsdaTask {
  std::vector<DomainDataset> sources;
  DomainDataset target;
  bool target_labels_visible_for_eval_only = true;

  int n_sources() const { return static_cast<int>(sources.size()); }
  int n_features() const { return target.n_features(); }
  int n_classes() const { return target.n_classes; }
};

void validate_task(const MsdaTask& task);

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

// Synthetic 2-D Gaussian class clusters; each domain applies its own random
// rotation (angle ~ U(-rot_scale, rot_scale)) and per-coordinate translation
// (~ U(-shift_scale, shift_scale)). The last domain is the target.
MsdaTask gen_blobs(int n_domains, int n_classes, int per_class, double shift_scale,
                   double rot_scale, std::uint64_t seed);

// Two interleaved half-circles per domain, same translation mechanism.
MsdaTask gen_moons(int n_domains, int per_class, double shift_scale,
                   std::uint64_t seed);

// CSV with header "f0,...,f{d-1},label"; n_classes = 1 + max(label).
DomainDataset load_csv(const std::string& path);
void save_csv(const DomainDataset& ds, const std::string& path);

// Z-score per feature, fit on all source samples pooled; the same transform
// is applied to the target. Degenerate (constant) dimensions pass through.
MsdaTask standardize(const MsdaTask& task);

// Stratified deterministic split; train size = round(fraction * n) up to
// per-class rounding (largest-remainder apportionment).
std::pair<DomainDataset, DomainDataset> split(const DomainDataset& ds,
                                              const SplitSpec& spec);

// Batch helpers shared by trainer and evaluation.
Tensor features_tensor(const DomainDataset& ds);
Tensor rows_tensor(const DomainDataset& ds, const std::vector<int>& idx);
std::vector<int> labels_at(const DomainDataset& ds, const std::vector<int>& idx);

}  // namespace msda
