#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msda/tensor.hpp"

namespace msda {

// Scalar-valued function of a set of leaf tensors. The harness perturbs leaf
// values and re-runs the forward pass, so the check is independent of every
// backward rule.
using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckResult {
  std::string op;
  int cases = 0;
  double max_rel_err = 0.0;
};

// Central differences with the given step; relative error uses
// |a - fd| / max(1, |a| + |fd|).
double gradcheck_max_rel_err(const ScalarFn& fn,
                             const std::vector<std::vector<int>>& leaf_shapes,
                             const std::vector<std::vector<double>>& leaf_values,
                             double step = 1e-6);

// Runs the whole suite: every differentiable op plus the full training
// objective, `cases` random instances each.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, int cases = 20);

}  // namespace msda
