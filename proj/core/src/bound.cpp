#include "msda/bound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msda/errors.hpp"
#include "msda/moments.hpp"
#include "vendor_json.hpp"

namespace msda {

namespace {

void check_binary_1d(const DomainDataset& ds) {
  validate_dataset(ds);
  if (ds.n_features() != 1) throw ValueError("threshold class needs 1-D features");
  if (ds.n_classes != 2) throw ValueError("threshold class needs binary labels");
}

void check_simplex(const std::vector<double>& v, const char* name) {
  double s = 0.0;
  for (double x : v) {
    if (x < 0.0) throw ValueError(std::string(name) + " entries must be >= 0");
    s += x;
  }
  if (std::fabs(s - 1.0) > 1e-9) throw ValueError(std::string(name) + " must sum to 1");
}

}  // namespace

std::vector<ThresholdHypothesis> ThresholdHypothesisClass::enumerate() const {
  if (grid.empty()) throw ValueError("threshold grid is empty");
  std::vector<ThresholdHypothesis> out;
  out.reserve(grid.size() * 2);
  for (double theta : grid) {
    out.push_back({theta, 0});
    out.push_back({theta, 1});
  }
  return out;
}

ThresholdHypothesisClass threshold_class_from_data(
    const std::vector<const DomainDataset*>& domains) {
  std::vector<double> xs;
  for (const auto* ds : domains) {
    check_binary_1d(*ds);
    for (int i = 0; i < ds->n_samples(); ++i) xs.push_back(ds->features.at(i, 0));
  }
  if (xs.empty()) throw ValueError("no data for threshold grid");
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  ThresholdHypothesisClass hclass;
  hclass.grid.push_back(xs.front() - 1.0);  // below-all threshold
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    hclass.grid.push_back(0.5 * (xs[i] + xs[i + 1]));
  }
  hclass.grid.push_back(xs.back() + 1.0);  // above-all threshold
  return hclass;
}

double empirical_error(const ThresholdHypothesis& h, const DomainDataset& ds) {
  check_binary_1d(ds);
  int wrong = 0;
  for (int i = 0; i < ds.n_samples(); ++i) {
    if (h(ds.features.at(i, 0)) != ds.labels[static_cast<std::size_t>(i)]) ++wrong;
  }
  return static_cast<double>(wrong) / ds.n_samples();
}

double alpha_weighted_error(const ThresholdHypothesis& h,
                            const std::vector<DomainDataset>& sources,
                            const std::vector<double>& alpha) {
  if (sources.size() != alpha.size()) {
    throw ValueError("alpha_weighted_error: one weight per source required");
  }
  check_simplex(alpha, "alpha");
  double acc = 0.0;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    acc += alpha[j] * empirical_error(h, sources[j]);
  }
  return acc;
}

double eta_term(const BoundInputs& b) {
  if (b.alpha.size() != b.beta.size() || b.alpha.empty()) {
    throw ValueError("eta_term: alpha and beta must be equal-length and non-empty");
  }
  check_simplex(b.alpha, "alpha");
  check_simplex(b.beta, "beta");
  if (b.m < 1) throw ValueError("eta_term: m must be >= 1");
  if (b.d < 1) throw ValueError("eta_term: d must be >= 1");
  if (b.m < b.d) throw ValueError("eta_term: m must be >= d");
  if (b.delta <= 0.0 || b.delta >= 1.0) throw ValueError("eta_term: delta must be in (0,1)");

  double ratio = 0.0;
  for (std::size_t j = 0; j < b.alpha.size(); ++j) {
    if (b.alpha[j] == 0.0) continue;
    if (b.beta[j] <= 0.0) {
      throw ValueError("eta_term: beta_j must be positive where alpha_j > 0");
    }
    ratio += b.alpha[j] * b.alpha[j] / b.beta[j];
  }
  const double md = static_cast<double>(b.m);
  const double complexity =
      (2.0 * b.d * (std::log(2.0 * md / b.d) + 1.0) + 2.0 * std::log(4.0 / b.delta)) / md;
  return 4.0 * std::sqrt(ratio * complexity);
}

std::pair<double, ThresholdHypothesis> lambda_j(const ThresholdHypothesisClass& hclass,
                                                const DomainDataset& source_j,
                                                const DomainDataset& target) {
  double best = std::numeric_limits<double>::infinity();
  ThresholdHypothesis best_h;
  for (const auto& h : hclass.enumerate()) {
    const double v = empirical_error(h, target) + empirical_error(h, source_j);
    if (v < best) {  // ties keep the first hypothesis in enumeration order
      best = v;
      best_h = h;
    }
  }
  return {best, best_h};
}

std::pair<double, double> source_source_lower_bound(const FeatureMatrix& d1,
                                                    const FeatureMatrix& d2,
                                                    const FeatureMatrix& dt, int k) {
  const double lhs = cross_moment_divergence(d1, dt, k) + cross_moment_divergence(d2, dt, k);
  const double rhs = cross_moment_divergence(d1, d2, k);
  return {lhs, rhs};
}

BoundReport verify_bound_structure(const BoundInstance& instance) {
  if (instance.sources.empty()) throw ValueError("bound instance needs sources");
  check_binary_1d(instance.target);
  for (const auto& s : instance.sources) check_binary_1d(s);
  const int n = static_cast<int>(instance.sources.size());

  BoundInputs inputs = instance.inputs;
  std::int64_t total = 0;
  for (const auto& s : instance.sources) total += s.n_samples();
  if (inputs.m <= 0) inputs.m = total;
  if (inputs.alpha.empty()) {
    inputs.alpha.assign(static_cast<std::size_t>(n), 1.0 / n);
  }
  if (inputs.beta.empty()) {
    for (const auto& s : instance.sources) {
      inputs.beta.push_back(static_cast<double>(s.n_samples()) / static_cast<double>(total));
    }
  }
  if (static_cast<int>(inputs.alpha.size()) != n || static_cast<int>(inputs.beta.size()) != n) {
    throw ValueError("bound instance: alpha/beta length must match source count");
  }
  check_simplex(inputs.alpha, "alpha");
  check_simplex(inputs.beta, "beta");
  if (inputs.k_max < 1) throw ValueError("bound instance: k_max must be >= 1");

  std::vector<const DomainDataset*> all;
  for (const auto& s : instance.sources) all.push_back(&s);
  all.push_back(&instance.target);
  const auto hclass = threshold_class_from_data(all);

  // Empirical alpha-weighted risk minimizer and target-optimal hypothesis.
  BoundReport report;
  double best_alpha_err = std::numeric_limits<double>::infinity();
  double best_target_err = std::numeric_limits<double>::infinity();
  for (const auto& h : hclass.enumerate()) {
    const double ae = alpha_weighted_error(h, instance.sources, inputs.alpha);
    if (ae < best_alpha_err) {
      best_alpha_err = ae;
      report.h_hat = h;
    }
    const double te = empirical_error(h, instance.target);
    if (te < best_target_err) {
      best_target_err = te;
      report.h_star = h;
    }
  }
  report.lhs_eps_t_hat = empirical_error(report.h_hat, instance.target);
  report.eps_t_star = best_target_err;
  report.eta = eta_term(inputs);
  report.alpha = inputs.alpha;
  report.beta = inputs.beta;

  for (int j = 0; j < n; ++j) {
    const auto [lam, h] = lambda_j(hclass, instance.sources[static_cast<std::size_t>(j)],
                                   instance.target);
    report.lambda.push_back(lam);
    report.sum_alpha_2lambda += inputs.alpha[static_cast<std::size_t>(j)] * 2.0 * lam;

    std::vector<double> per_k;
    double moment_sum = 0.0;
    for (int k = 1; k <= inputs.k_max; ++k) {
      const double d = cross_moment_divergence(
          instance.sources[static_cast<std::size_t>(j)].features,
          instance.target.features, k);
      per_k.push_back(d);
      moment_sum += d;
    }
    report.d_cm.push_back(std::move(per_k));
    report.sum_alpha_moment +=
        inputs.alpha[static_cast<std::size_t>(j)] * report.a_n_convention * moment_sum;
  }

  report.rhs_total = report.eps_t_star + report.eta + report.eps_convention +
                     report.sum_alpha_2lambda + report.sum_alpha_moment;
  report.satisfied = report.lhs_eps_t_hat <= report.rhs_total + 1e-12;
  return report;
}

std::string to_json_string(const BoundReport& report) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["lhs"] = {{"eps_T_h_hat", report.lhs_eps_t_hat},
                {"h_hat", {{"threshold", report.h_hat.threshold},
                           {"below", report.h_hat.below}}}};
  doc["rhs_terms"] = {
      {"eps_T_h_star", report.eps_t_star},
      {"eta", report.eta},
      {"epsilon", report.eps_convention},
      {"sum_alpha_2lambda", report.sum_alpha_2lambda},
      {"sum_alpha_moment", report.sum_alpha_moment},
  };
  doc["h_star"] = {{"threshold", report.h_star.threshold}, {"below", report.h_star.below}};
  doc["lambda"] = report.lambda;
  doc["d_cm"] = report.d_cm;
  doc["alpha"] = report.alpha;
  doc["beta"] = report.beta;
  doc["rhs_total"] = report.rhs_total;
  doc["satisfied"] = report.satisfied;
  doc["a_n_convention"] = report.a_n_convention;
  doc["epsilon_convention"] = report.eps_convention;
  doc["structural_check"] = true;
  return doc.dump(2) + "\n";
}

namespace {

DomainDataset dataset_from_xy(const nlohmann::json& j, const std::string& name) {
  const auto xs = j.at("x").get<std::vector<double>>();
  const auto ys = j.at("y").get<std::vector<int>>();
  if (xs.size() != ys.size() || xs.empty()) {
    throw SchemaError("bound instance: x and y must be non-empty and equal length");
  }
  DomainDataset ds;
  ds.name = name;
  ds.features.rows = static_cast<int>(xs.size());
  ds.features.cols = 1;
  ds.features.v = xs;
  ds.labels = ys;
  for (int y : ys) {
    if (y != 0 && y != 1) throw DataError("bound instance: labels must be binary");
  }
  ds.n_classes = 2;
  return ds;
}

}  // namespace

BoundInstance bound_instance_from_json_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bound instance: ") + e.what());
  }
  try {
    BoundInstance inst;
    int j = 0;
    for (const auto& s : doc.at("sources")) {
      inst.sources.push_back(dataset_from_xy(s, "source_" + std::to_string(j++)));
    }
    inst.target = dataset_from_xy(doc.at("target"), "target");
    if (doc.contains("alpha")) inst.inputs.alpha = doc["alpha"].get<std::vector<double>>();
    if (doc.contains("beta")) inst.inputs.beta = doc["beta"].get<std::vector<double>>();
    if (doc.contains("m")) inst.inputs.m = doc["m"].get<std::int64_t>();
    if (doc.contains("d")) inst.inputs.d = doc["d"].get<int>();
    if (doc.contains("delta")) inst.inputs.delta = doc["delta"].get<double>();
    if (doc.contains("k_max")) inst.inputs.k_max = doc["k_max"].get<int>();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bound instance: ") + e.what());
  }
}

}  // namespace msda
