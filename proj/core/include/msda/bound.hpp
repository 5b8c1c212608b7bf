#pragma once

#include <string>
#include <utility>
#include <vector>

#include "msda/data.hpp"

namespace msda {

// Inputs for the sample-complexity term of the generalization bound.
struct BoundInputs {
  std::vector<double> alpha;  // simplex over sources
  std::vector<double> beta;   // simplex of per-source sample shares
  std::int64_t m = 0;         // total labeled source samples
  int d = 2;                  // VC dimension of the hypothesis class
  double delta = 0.1;
  int k_max = 3;              // moment order cap for divergence terms
};

// 1-D threshold, both orientations: h(x) = below if x <= threshold else
// 1 - below.
struct ThresholdHypothesis {
  double threshold = 0.0;
  int below = 0;  // label assigned on the x <= threshold side

  int operator()(double x) const { return x <= threshold ? below : 1 - below; }
};

// Finite split-point surrogate: all midpoints of the pooled sorted data plus
// two boundary thresholds so constant hypotheses are representable.
struct ThresholdHypothesisClass {
  std::vector<double> grid;  // strictly increasing

  std::vector<ThresholdHypothesis> enumerate() const;
};

ThresholdHypothesisClass threshold_class_from_data(
    const std::vector<const DomainDataset*>& domains);

// Fraction of samples where h disagrees with the labels (binary, 1-D).
double empirical_error(const ThresholdHypothesis& h, const DomainDataset& ds);

double alpha_weighted_error(const ThresholdHypothesis& h,
                            const std::vector<DomainDataset>& sources,
                            const std::vector<double>& alpha);

// 4*sqrt((sum_j alpha_j^2/beta_j) * (2d(ln(2m/d)+1) + 2 ln(4/delta)) / m).
double eta_term(const BoundInputs& b);

// Minimum of target error plus source-j error over the finite class.
std::pair<double, ThresholdHypothesis> lambda_j(const ThresholdHypothesisClass& hclass,
                                                const DomainDataset& source_j,
                                                const DomainDataset& target);

struct BoundInstance {
  std::vector<DomainDataset> sources;
  DomainDataset target;
  BoundInputs inputs;  // alpha/beta may be empty: uniform / size-proportional
};

struct BoundReport {
  double lhs_eps_t_hat = 0.0;  // target error of the empirical alpha-minimizer
  ThresholdHypothesis h_hat;
  double eps_t_star = 0.0;  // best achievable target error in the class
  ThresholdHypothesis h_star;
  double eta = 0.0;
  double sum_alpha_2lambda = 0.0;
  double sum_alpha_moment = 0.0;
  std::vector<double> lambda;                  // per source
  std::vector<std::vector<double>> d_cm;       // per source, per order 1..k_max
  std::vector<double> alpha;
  std::vector<double> beta;
  double rhs_total = 0.0;
  bool satisfied = false;
  // The polynomial-approximation constants are not computable from data;
  // the check fixes a_n = 1 and eps = 0 and is structural, not a proof.
  double a_n_convention = 1.0;
  double eps_convention = 0.0;
};

// Evaluates every computable term of the pairwise target-error bound on a
// finite 1-D instance and reports whether lhs <= rhs under the convention.
BoundReport verify_bound_structure(const BoundInstance& instance);

// Both sides of d(D1,DT) + d(D2,DT) >= d(D1,D2) for order k.
std::pair<double, double> source_source_lower_bound(const FeatureMatrix& d1,
                                                    const FeatureMatrix& d2,
                                                    const FeatureMatrix& dt, int k);

std::string to_json_string(const BoundReport& report);
BoundInstance bound_instance_from_json_string(const std::string& text);

}  // namespace msda
