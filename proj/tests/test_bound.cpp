#include <cmath>

#include <algorithm>
#include <limits>

#include "doctest.h"
#include "msda/bound.hpp"
#include "msda/errors.hpp"
#include "msda/moments.hpp"
#include "msda/rng.hpp"
#include "oracles.hpp"

using namespace msda;

namespace {

DomainDataset make_1d(std::vector<double> xs, std::vector<int> ys,
                      const std::string& name = "d") {
  DomainDataset ds;
  ds.name = name;
  ds.features.rows = static_cast<int>(xs.size());
  ds.features.cols = 1;
  ds.features.v = std::move(xs);
  ds.labels = std::move(ys);
  ds.n_classes = 2;
  return ds;
}

// Two-cluster binary domain: class 0 around mu0, class 1 around mu1.
DomainDataset random_domain(Rng& rng, int n_per_class, double mu0, double mu1,
                            double noise) {
  std::vector<double> xs;
  std::vector<int> ys;
  for (int i = 0; i < n_per_class; ++i) {
    xs.push_back(mu0 + noise * rng.normal());
    ys.push_back(0);
    xs.push_back(mu1 + noise * rng.normal());
    ys.push_back(1);
  }
  return make_1d(std::move(xs), std::move(ys));
}

}  // namespace

TEST_CASE("empirical error basics") {
  const auto ds = make_1d({0.0, 1.0, 2.0, 3.0, 4.0}, {0, 0, 0, 1, 1});
  ThresholdHypothesis perfect{2.5, 0};
  CHECK(empirical_error(perfect, ds) == 0.0);

  ThresholdHypothesis inverted{2.5, 1};
  CHECK(empirical_error(inverted, ds) == 1.0);

  // constant-0 predictor on 60/40 data
  const auto mixed = make_1d({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {0, 0, 0, 0, 0, 0, 1, 1, 1, 1});
  ThresholdHypothesis const_zero{100.0, 0};
  CHECK(empirical_error(const_zero, mixed) == doctest::Approx(0.4));

  auto wide = make_1d({0, 1}, {0, 1});
  wide.features.cols = 2;
  wide.features.rows = 1;
  wide.labels = {0};
  CHECK_THROWS_AS(empirical_error(perfect, wide), ValueError);

  auto three = make_1d({0, 1, 2}, {0, 1, 2});
  three.n_classes = 3;
  CHECK_THROWS_AS(empirical_error(perfect, three), ValueError);
}

TEST_CASE("alpha weighted error") {
  const auto a = make_1d({0, 1, 2, 3, 4}, {0, 0, 0, 1, 1});
  const auto b = make_1d({0, 1, 2, 3, 4}, {1, 1, 0, 1, 0});
  ThresholdHypothesis h{2.5, 0};
  const double ea = empirical_error(h, a);
  const double eb = empirical_error(h, b);

  CHECK(alpha_weighted_error(h, {a}, {1.0}) == ea);
  CHECK(alpha_weighted_error(h, {a, b}, {1.0, 0.0}) == ea);
  CHECK(alpha_weighted_error(h, {a, b}, {0.0, 1.0}) == eb);
  CHECK(alpha_weighted_error(h, {a, b}, {0.5, 0.5}) ==
        doctest::Approx(0.5 * ea + 0.5 * eb));
  CHECK_THROWS_AS(alpha_weighted_error(h, {a, b}, {0.7, 0.7}), ValueError);
}

TEST_CASE("eta matches the hand-evaluated value") {
  BoundInputs b;
  b.alpha = {1.0};
  b.beta = {1.0};
  b.m = 100;
  b.d = 1;
  b.delta = 0.1;
  CHECK(std::fabs(eta_term(b) - 1.7877088640524863) < 1e-6);
}

TEST_CASE("eta monotonicity") {
  BoundInputs b;
  b.alpha = {0.5, 0.5};
  b.beta = {0.5, 0.5};
  b.d = 2;
  b.delta = 0.1;
  double prev = std::numeric_limits<double>::infinity();
  for (std::int64_t m : {50, 100, 200, 400, 800}) {
    b.m = m;
    const double v = eta_term(b);
    CHECK(v < prev);  // strictly decreasing in m
    prev = v;
  }
  b.m = 200;
  double prev_d = 0.0;
  for (int d : {1, 2, 4, 8}) {
    b.d = d;
    const double v = eta_term(b);
    CHECK(v > prev_d);  // strictly increasing in d
    prev_d = v;
  }
  b.d = 2;
  double prev_delta = 0.0;
  for (double delta : {0.5, 0.2, 0.1, 0.01}) {
    b.delta = delta;
    const double v = eta_term(b);
    CHECK(v > prev_delta);  // increasing as delta shrinks
    prev_delta = v;
  }
}

TEST_CASE("uniform beta minimizes the alpha-ratio term for fixed uniform alpha") {
  BoundInputs b;
  b.alpha = {0.5, 0.5};
  b.m = 100;
  b.d = 2;
  b.delta = 0.1;
  b.beta = {0.5, 0.5};
  const double at_uniform = eta_term(b);
  for (int t = 1; t <= 19; ++t) {
    const double beta0 = t / 20.0;
    if (beta0 == 0.5) continue;
    b.beta = {beta0, 1.0 - beta0};
    CHECK(eta_term(b) >= at_uniform);
  }
}

TEST_CASE("eta input validation") {
  BoundInputs b;
  b.alpha = {1.0};
  b.beta = {1.0};
  b.m = 100;
  b.d = 1;
  b.delta = 0.1;

  BoundInputs bad = b;
  bad.beta = {0.0};
  CHECK_THROWS_AS(eta_term(bad), ValueError);
  bad = b;
  bad.m = 0;
  CHECK_THROWS_AS(eta_term(bad), ValueError);
  bad = b;
  bad.d = 200;  // m < d
  CHECK_THROWS_AS(eta_term(bad), ValueError);
  bad = b;
  bad.delta = 1.5;
  CHECK_THROWS_AS(eta_term(bad), ValueError);
}

TEST_CASE("lambda_j on identical and separable domains") {
  const auto sep = make_1d({0, 1, 2, 10, 11, 12}, {0, 0, 0, 1, 1, 1});
  const auto hclass = threshold_class_from_data({&sep, &sep});
  const auto [lam, h] = lambda_j(hclass, sep, sep);
  CHECK(lam == 0.0);  // perfectly separable identical domains
  CHECK(empirical_error(h, sep) == 0.0);

  // noisy identical domains: lambda = 2 * best achievable error
  const auto noisy = make_1d({0, 1, 2, 3, 4, 5}, {0, 1, 0, 1, 0, 1});
  const auto hclass2 = threshold_class_from_data({&noisy, &noisy});
  double best = 1.0;
  for (const auto& h2 : hclass2.enumerate()) best = std::min(best, empirical_error(h2, noisy));
  const auto [lam2, h2] = lambda_j(hclass2, noisy, noisy);
  CHECK(lam2 == doctest::Approx(2.0 * best));
}

TEST_CASE("lambda_j matches exhaustive enumeration on random instances") {
  Rng rng(313);
  for (int trial = 0; trial < 50; ++trial) {
    const auto src = random_domain(rng, 3 + static_cast<int>(rng.bounded(20)),
                                   rng.uniform(-2, 0), rng.uniform(0, 2), 0.8);
    const auto tgt = random_domain(rng, 3 + static_cast<int>(rng.bounded(20)),
                                   rng.uniform(-2, 0), rng.uniform(0, 2), 0.8);
    const auto hclass = threshold_class_from_data({&src, &tgt});
    const auto [lam, h] = lambda_j(hclass, src, tgt);

    // brute force over a fine threshold sweep plus the class grid itself
    double brute = std::numeric_limits<double>::infinity();
    auto xs = src.features.v;
    xs.insert(xs.end(), tgt.features.v.begin(), tgt.features.v.end());
    std::sort(xs.begin(), xs.end());
    std::vector<double> cands = hclass.grid;
    for (double x : xs) cands.push_back(x);  // thresholds at the points too
    for (double theta : cands) {
      for (int below : {0, 1}) {
        oracle::BruteHypothesis bh{theta, below};
        const double v = oracle::error_on(bh, tgt.features.v, tgt.labels) +
                         oracle::error_on(bh, src.features.v, src.labels);
        brute = std::min(brute, v);
      }
    }
    CHECK(lam == doctest::Approx(brute).epsilon(1e-12));
    CHECK(lam >= 0.0);
  }
}

TEST_CASE("empirical minimizer attains the minimum alpha-weighted error") {
  Rng rng(717);
  for (int trial = 0; trial < 20; ++trial) {
    BoundInstance inst;
    inst.sources.push_back(random_domain(rng, 10, -1.0, 1.0, 0.7));
    inst.sources.push_back(random_domain(rng, 8, -0.5, 1.5, 0.7));
    inst.target = random_domain(rng, 12, -0.8, 1.2, 0.7);
    const auto report = verify_bound_structure(inst);

    std::vector<const DomainDataset*> all{&inst.sources[0], &inst.sources[1], &inst.target};
    const auto hclass = threshold_class_from_data(all);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : hclass.enumerate()) {
      best = std::min(best, alpha_weighted_error(h, inst.sources, report.alpha));
    }
    CHECK(alpha_weighted_error(report.h_hat, inst.sources, report.alpha) ==
          doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("bound structure on identical domains") {
  Rng rng(99);
  const auto d = random_domain(rng, 20, -1.0, 1.0, 0.5);
  BoundInstance inst;
  inst.sources = {d, d};
  inst.target = d;
  const auto report = verify_bound_structure(inst);
  CHECK(report.lhs_eps_t_hat == report.eps_t_star);  // alpha-minimizer is target-optimal
  CHECK(report.sum_alpha_moment == 0.0);
  CHECK(report.satisfied);
}

TEST_CASE("bound structure holds on random instances") {
  Rng rng(2024);
  int violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    BoundInstance inst;
    const int n_src = 1 + static_cast<int>(rng.bounded(3));
    for (int s = 0; s < n_src; ++s) {
      inst.sources.push_back(random_domain(rng, 5 + static_cast<int>(rng.bounded(30)),
                                           rng.uniform(-2.0, 0.0), rng.uniform(0.0, 2.0),
                                           rng.uniform(0.3, 1.2)));
    }
    inst.target = random_domain(rng, 5 + static_cast<int>(rng.bounded(30)),
                                rng.uniform(-2.0, 0.0), rng.uniform(0.0, 2.0),
                                rng.uniform(0.3, 1.2));
    const auto report = verify_bound_structure(inst);
    if (!report.satisfied) {
      ++violations;
      MESSAGE("violation: lhs=" << report.lhs_eps_t_hat << " rhs=" << report.rhs_total);
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("moment terms grow along a translation family") {
  Rng rng(404);
  const auto base = random_domain(rng, 40, -1.0, 1.0, 0.5);
  double prev = -1.0;
  for (double shift : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    auto shifted = base;
    for (auto& v : shifted.features.v) v += shift;
    double total = 0.0;
    for (int k = 1; k <= 3; ++k) {
      total += cross_moment_divergence(base.features, shifted.features, k);
    }
    CHECK(total > prev);
    prev = total;
  }
}

TEST_CASE("source-source lower bound") {
  Rng rng(606);
  const auto d1 = random_domain(rng, 15, -1, 1, 0.6);
  const auto d2 = random_domain(rng, 15, 0, 2, 0.6);

  // identical sources: rhs is zero
  auto [lhs_same, rhs_same] = source_source_lower_bound(d1.features, d1.features,
                                                        d2.features, 2);
  CHECK(rhs_same == 0.0);
  CHECK(lhs_same >= 0.0);

  // d1 == target: both sides equal d(d2, target)
  auto [lhs_eq, rhs_eq] = source_source_lower_bound(d1.features, d2.features,
                                                    d1.features, 2);
  CHECK(lhs_eq == doctest::Approx(rhs_eq));

  for (int k = 1; k <= 3; ++k) {
    for (int trial = 0; trial < 167; ++trial) {
      const auto a = random_domain(rng, 4 + static_cast<int>(rng.bounded(12)),
                                   rng.uniform(-2, 0), rng.uniform(0, 2), 0.7);
      const auto b = random_domain(rng, 4 + static_cast<int>(rng.bounded(12)),
                                   rng.uniform(-2, 0), rng.uniform(0, 2), 0.7);
      const auto t = random_domain(rng, 4 + static_cast<int>(rng.bounded(12)),
                                   rng.uniform(-2, 0), rng.uniform(0, 2), 0.7);
      auto [lhs, rhs] = source_source_lower_bound(a.features, b.features, t.features, k);
      CHECK(lhs >= rhs - 1e-9);
    }
  }
}

TEST_CASE("bound instance json parsing") {
  const std::string good = R"({
    "sources": [{"x": [0, 1, 2], "y": [0, 0, 1]}],
    "target": {"x": [0.5, 1.5], "y": [0, 1]},
    "delta": 0.2, "k_max": 2, "d": 2
  })";
  const auto inst = bound_instance_from_json_string(good);
  CHECK(inst.sources.size() == 1);
  CHECK(inst.inputs.delta == 0.2);
  const auto report = verify_bound_structure(inst);
  CHECK(report.lambda.size() == 1);
  CHECK(report.d_cm[0].size() == 2);

  CHECK_THROWS_AS(bound_instance_from_json_string("nope"), ParseError);
  CHECK_THROWS_AS(bound_instance_from_json_string("{}"), SchemaError);
  const std::string nonbinary = R"({
    "sources": [{"x": [0, 1], "y": [0, 2]}],
    "target": {"x": [0.5], "y": [0]}
  })";
  CHECK_THROWS_AS(bound_instance_from_json_string(nonbinary), DataError);
}
