#pragma once

#include <string>
#include <vector>

#include "msda/data.hpp"
#include "msda/tensor.hpp"

namespace msda {

struct MomentConfig {
  int max_order = 2;
  // Elementwise raw moments are the representation used by the training
  // loss; monomial (cross) moments are the analysis-side representation.
  bool use_raw_elementwise_moments = true;
};

struct MomentVector {
  int order = 0;
  std::vector<double> values;
};

// All exponent tuples of a fixed total order, lexicographically sorted.
struct MultiIndexSet {
  int n_dims = 0;
  int order = 0;
  std::vector<std::vector<int>> indices;
};

// Per-dimension mean of the k-th elementwise power.
MomentVector elementwise_moment(const FeatureMatrix& samples, int k);

// Empirical monomial moments of order exactly k, in MultiIndexSet order.
MomentVector monomial_moments(const FeatureMatrix& samples, int k);

MultiIndexSet enumerate_multi_indices(int n_dims, int order);

// Differentiable moment-distance decomposition: source-target average plus
// pairwise source-source average per order, summed over orders 1..max_order.
// full = source_target + source_source by construction.
struct MdTerms {
  Tensor source_target;
  Tensor source_source;
  Tensor full;
};

MdTerms md_squared_terms(const std::vector<Tensor>& source_batches,
                         const Tensor& target_batch, const MomentConfig& cfg);

Tensor md_squared(const std::vector<Tensor>& source_batches, const Tensor& target_batch,
                  const MomentConfig& cfg);

// Plain-value convenience for diagnostics on sample matrices.
double md_squared_value(const std::vector<FeatureMatrix>& sources,
                        const FeatureMatrix& target, const MomentConfig& cfg);

// L1 distance between order-k empirical monomial moment vectors.
double cross_moment_divergence(const FeatureMatrix& a, const FeatureMatrix& b, int k);

struct TriangleCheck {
  int i = 0;
  int j = 0;
  int t = 0;       // d(i,t) + d(j,t) - d(i,j), expected >= 0 for a metric
  double value = 0.0;
};

struct OrderReport {
  int order = 0;
  std::vector<MomentVector> domain_moments;  // monomial moments per domain
  std::vector<std::vector<double>> pairwise;
  std::vector<TriangleCheck> triangle_checks;
};

struct MdDecomposition {
  bool present = false;
  double source_target = 0.0;
  double source_source = 0.0;
  double full = 0.0;
};

struct MomentReport {
  std::vector<OrderReport> orders;
  MdDecomposition md;  // filled when a designated target exists
};

// Pairwise cross-moment divergence matrices for k = 1..k_max plus all
// triangle-inequality check values.
MomentReport divergence_matrix(const std::vector<FeatureMatrix>& domains, int k_max);

std::string to_json_string(const MomentReport& report);

}  // namespace msda
