#include "msda/moments.hpp"

#include <cmath>

#include "msda/errors.hpp"
#include "vendor_json.hpp"

namespace msda {

MomentVector elementwise_moment(const FeatureMatrix& samples, int k) {
  if (k < 1) throw ValueError("elementwise_moment: order must be >= 1");
  if (samples.rows == 0) throw ValueError("elementwise_moment: empty sample set");
  MomentVector mv;
  mv.order = k;
  mv.values.assign(static_cast<std::size_t>(samples.cols), 0.0);
  for (int j = 0; j < samples.cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < samples.rows; ++i) acc += ipow(samples.at(i, j), k);
    mv.values[static_cast<std::size_t>(j)] = acc / static_cast<double>(samples.rows);
  }
  return mv;
}

MultiIndexSet enumerate_multi_indices(int n_dims, int order) {
  if (n_dims < 1) throw ValueError("enumerate_multi_indices: n_dims must be >= 1");
  if (order < 1) throw ValueError("enumerate_multi_indices: order must be >= 1");
  MultiIndexSet set;
  set.n_dims = n_dims;
  set.order = order;
  std::vector<int> cur(static_cast<std::size_t>(n_dims), 0);
  // Ascending lexicographic order: recurse with the first coordinate slowest.
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == n_dims - 1) {
      cur[static_cast<std::size_t>(pos)] = remaining;
      set.indices.push_back(cur);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      cur[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  rec(rec, 0, order);
  return set;
}

MomentVector monomial_moments(const FeatureMatrix& samples, int k) {
  if (k < 1) throw ValueError("monomial_moments: order must be >= 1");
  if (samples.rows == 0) throw ValueError("monomial_moments: empty sample set");
  const auto set = enumerate_multi_indices(samples.cols, k);
  MomentVector mv;
  mv.order = k;
  mv.values.reserve(set.indices.size());
  for (const auto& idx : set.indices) {
    double acc = 0.0;
    for (int i = 0; i < samples.rows; ++i) {
      double term = 1.0;
      for (int j = 0; j < samples.cols; ++j) {
        term *= ipow(samples.at(i, j), idx[static_cast<std::size_t>(j)]);
      }
      acc += term;
    }
    mv.values.push_back(acc / static_cast<double>(samples.rows));
  }
  return mv;
}

MdTerms md_squared_terms(const std::vector<Tensor>& source_batches,
                         const Tensor& target_batch, const MomentConfig& cfg) {
  if (cfg.max_order < 1) throw ValueError("md_squared: max_order must be >= 1");
  if (!cfg.use_raw_elementwise_moments) {
    throw ConfigError(
        "md_squared: monomial mode is analysis-only; use divergence_matrix");
  }
  if (source_batches.empty()) throw ValueError("md_squared: at least one source batch");
  const int n = static_cast<int>(source_batches.size());
  const int d = target_batch.cols();
  for (const auto& s : source_batches) {
    if (s.cols() != d) throw ShapeError("md_squared: batch widths disagree");
  }

  Tensor st_total;
  Tensor ss_total;
  for (int k = 1; k <= cfg.max_order; ++k) {
    std::vector<Tensor> src_moments;
    src_moments.reserve(static_cast<std::size_t>(n));
    for (const auto& s : source_batches) src_moments.push_back(mean(pow_k(s, k), 0));
    const Tensor tgt_moment = mean(pow_k(target_batch, k), 0);

    Tensor st_k;
    for (int i = 0; i < n; ++i) {
      Tensor term = l2_norm(sub(src_moments[static_cast<std::size_t>(i)], tgt_moment));
      st_k = st_k.defined() ? add(st_k, term) : term;
    }
    st_k = (1.0 / n) * st_k;
    st_total = st_total.defined() ? add(st_total, st_k) : st_k;

    if (n >= 2) {
      Tensor ss_k;
      int pairs = 0;
      for (int i = 0; i < n - 1; ++i) {
        for (int j = i + 1; j < n; ++j) {
          Tensor term = l2_norm(sub(src_moments[static_cast<std::size_t>(i)],
                                    src_moments[static_cast<std::size_t>(j)]));
          ss_k = ss_k.defined() ? add(ss_k, term) : term;
          ++pairs;
        }
      }
      ss_k = (1.0 / pairs) * ss_k;
      ss_total = ss_total.defined() ? add(ss_total, ss_k) : ss_k;
    }
  }
  // Empty-sum convention for a single source.
  if (!ss_total.defined()) ss_total = Tensor::scalar(0.0);

  MdTerms terms;
  terms.source_target = st_total;
  terms.source_source = ss_total;
  terms.full = add(st_total, ss_total);
  return terms;
}

Tensor md_squared(const std::vector<Tensor>& source_batches, const Tensor& target_batch,
                  const MomentConfig& cfg) {
  return md_squared_terms(source_batches, target_batch, cfg).full;
}

double md_squared_value(const std::vector<FeatureMatrix>& sources,
                        const FeatureMatrix& target, const MomentConfig& cfg) {
  std::vector<Tensor> src;
  src.reserve(sources.size());
  for (const auto& s : sources) src.push_back(Tensor::matrix(s.rows, s.cols, s.v));
  return md_squared(src, Tensor::matrix(target.rows, target.cols, target.v), cfg).item();
}

double cross_moment_divergence(const FeatureMatrix& a, const FeatureMatrix& b, int k) {
  if (a.cols != b.cols) throw ShapeError("cross_moment_divergence: widths disagree");
  const auto ma = monomial_moments(a, k);
  const auto mb = monomial_moments(b, k);
  double acc = 0.0;
  for (std::size_t t = 0; t < ma.values.size(); ++t) {
    acc += std::fabs(ma.values[t] - mb.values[t]);
  }
  return acc;
}

MomentReport divergence_matrix(const std::vector<FeatureMatrix>& domains, int k_max) {
  if (domains.size() < 2) throw ValueError("divergence_matrix: need at least two domains");
  if (k_max < 1) throw ValueError("divergence_matrix: k_max must be >= 1");
  const int m = static_cast<int>(domains.size());

  MomentReport report;
  for (int k = 1; k <= k_max; ++k) {
    OrderReport ord;
    ord.order = k;
    for (const auto& dom : domains) ord.domain_moments.push_back(monomial_moments(dom, k));
    ord.pairwise.assign(static_cast<std::size_t>(m),
                        std::vector<double>(static_cast<std::size_t>(m), 0.0));
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        double dij = 0.0;
        const auto& a = ord.domain_moments[static_cast<std::size_t>(i)].values;
        const auto& b = ord.domain_moments[static_cast<std::size_t>(j)].values;
        if (a.size() != b.size()) throw ShapeError("divergence_matrix: widths disagree");
        for (std::size_t t = 0; t < a.size(); ++t) dij += std::fabs(a[t] - b[t]);
        ord.pairwise[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = dij;
        ord.pairwise[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = dij;
      }
    }
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        for (int t = 0; t < m; ++t) {
          if (t == i || t == j) continue;
          TriangleCheck chk;
          chk.i = i;
          chk.j = j;
          chk.t = t;
          chk.value = ord.pairwise[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] +
                      ord.pairwise[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)] -
                      ord.pairwise[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          ord.triangle_checks.push_back(chk);
        }
      }
    }
    report.orders.push_back(std::move(ord));
  }

  // Treat the last domain as the target for the MD decomposition.
  MomentConfig cfg;
  cfg.max_order = std::min(k_max, 2);
  std::vector<FeatureMatrix> srcs(domains.begin(), domains.end() - 1);
  std::vector<Tensor> src_t;
  for (const auto& s : srcs) src_t.push_back(Tensor::matrix(s.rows, s.cols, s.v));
  const auto terms = md_squared_terms(
      src_t, Tensor::matrix(domains.back().rows, domains.back().cols, domains.back().v), cfg);
  report.md.present = true;
  report.md.source_target = terms.source_target.item();
  report.md.source_source = terms.source_source.item();
  report.md.full = terms.full.item();
  return report;
}

std::string to_json_string(const MomentReport& report) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["orders"] = nlohmann::ordered_json::array();
  for (const auto& ord : report.orders) {
    nlohmann::ordered_json o;
    o["order"] = ord.order;
    o["moments"] = nlohmann::ordered_json::array();
    for (const auto& mv : ord.domain_moments) o["moments"].push_back(mv.values);
    o["pairwise"] = ord.pairwise;
    o["triangle_checks"] = nlohmann::ordered_json::array();
    for (const auto& chk : ord.triangle_checks) {
      o["triangle_checks"].push_back(
          {{"i", chk.i}, {"j", chk.j}, {"t", chk.t}, {"value", chk.value}});
    }
    doc["orders"].push_back(std::move(o));
  }
  if (report.md.present) {
    doc["md2"] = {{"source_target", report.md.source_target},
                  {"source_source", report.md.source_source},
                  {"full", report.md.full}};
  }
  return doc.dump(2) + "\n";
}

}  // namespace msda
