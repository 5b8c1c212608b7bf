#include "msda/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "msda/errors.hpp"
#include "msda/model.hpp"
#include "msda/moments.hpp"
#include "msda/rng.hpp"

namespace msda {

double gradcheck_max_rel_err(const ScalarFn& fn,
                             const std::vector<std::vector<int>>& leaf_shapes,
                             const std::vector<std::vector<double>>& leaf_values,
                             double step) {
  std::vector<Tensor> leaves;
  for (std::size_t t = 0; t < leaf_shapes.size(); ++t) {
    leaves.push_back(Tensor::from_data(leaf_shapes[t], leaf_values[t], true));
  }
  const Tensor loss = fn(leaves);
  backward(loss);

  auto forward_at = [&](const std::vector<std::vector<double>>& vals) {
    std::vector<Tensor> l;
    for (std::size_t t = 0; t < leaf_shapes.size(); ++t) {
      l.push_back(Tensor::from_data(leaf_shapes[t], vals[t], false));
    }
    return fn(l).item();
  };

  double max_rel = 0.0;
  std::vector<std::vector<double>> vals = leaf_values;
  for (std::size_t t = 0; t < leaves.size(); ++t) {
    const auto& analytic = leaves[t].grad();
    for (std::size_t i = 0; i < vals[t].size(); ++i) {
      const double keep = vals[t][i];
      vals[t][i] = keep + step;
      const double fp = forward_at(vals);
      vals[t][i] = keep - step;
      const double fm = forward_at(vals);
      vals[t][i] = keep;
      const double fd = (fp - fm) / (2.0 * step);
      const double rel =
          std::fabs(analytic[i] - fd) / std::max(1.0, std::fabs(analytic[i]) + std::fabs(fd));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

namespace {

std::vector<double> draw(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Magnitudes in [lo, hi], random sign: keeps relu/abs inputs off the kink.
std::vector<double> draw_signed(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) {
    const double mag = rng.uniform(lo, hi);
    x = rng.uniform01() < 0.5 ? -mag : mag;
  }
  return v;
}

std::size_t numel_of(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

// Weighted sum with fixed weights turns any output into a scalar while
// exercising non-uniform upstream gradients.
ScalarFn weighted(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                  std::vector<double> weights, std::vector<int> out_shape) {
  return [op, weights = std::move(weights), out_shape = std::move(out_shape)](
             const std::vector<Tensor>& leaves) {
    const Tensor w = Tensor::from_data(out_shape, weights, false);
    return sum(mul(op(leaves), w));
  };
}

struct SuiteCase {
  std::vector<std::vector<int>> shapes;
  std::vector<std::vector<double>> values;
  ScalarFn fn;
};

using CaseGen = std::function<SuiteCase(Rng&)>;

int dim(Rng& rng) { return 2 + static_cast<int>(rng.bounded(3)); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, int cases) {
  std::vector<std::pair<std::string, CaseGen>> gens;

  gens.emplace_back("matmul", [](Rng& rng) {
    const int m = dim(rng), k = dim(rng), n = dim(rng);
    SuiteCase c;
    c.shapes = {{m, k}, {k, n}};
    c.values = {draw(rng, numel_of(c.shapes[0]), -2.0, 2.0),
                draw(rng, numel_of(c.shapes[1]), -2.0, 2.0)};
    c.fn = weighted([](const std::vector<Tensor>& l) { return matmul(l[0], l[1]); },
                    draw(rng, static_cast<std::size_t>(m) * n, -1.0, 1.0), {m, n});
    return c;
  });

  const auto elementwise_gen = [](const char* name,
                                  Tensor (*op)(const Tensor&, const Tensor&)) {
    return [op](Rng& rng) {
      const int r = dim(rng), ccol = dim(rng);
      const bool scalar_rhs = rng.uniform01() < 0.25;
      SuiteCase c;
      c.shapes = {{r, ccol}, scalar_rhs ? std::vector<int>{1} : std::vector<int>{r, ccol}};
      c.values = {draw(rng, numel_of(c.shapes[0]), -2.0, 2.0),
                  draw(rng, numel_of(c.shapes[1]), -2.0, 2.0)};
      c.fn = weighted([op](const std::vector<Tensor>& l) { return op(l[0], l[1]); },
                      draw(rng, static_cast<std::size_t>(r) * ccol, -1.0, 1.0), {r, ccol});
      return c;
    };
  };
  gens.emplace_back("add", elementwise_gen("add", add));
  gens.emplace_back("sub", elementwise_gen("sub", sub));
  gens.emplace_back("mul", elementwise_gen("mul", mul));

  const auto unary_gen = [](std::function<Tensor(const Tensor&)> op, double lo, double hi,
                            bool sign) {
    return [op = std::move(op), lo, hi, sign](Rng& rng) {
      const int r = dim(rng), ccol = dim(rng);
      SuiteCase c;
      c.shapes = {{r, ccol}};
      c.values = {sign ? draw_signed(rng, numel_of(c.shapes[0]), lo, hi)
                       : draw(rng, numel_of(c.shapes[0]), lo, hi)};
      c.fn = weighted([op](const std::vector<Tensor>& l) { return op(l[0]); },
                      draw(rng, static_cast<std::size_t>(r) * ccol, -1.0, 1.0), {r, ccol});
      return c;
    };
  };
  gens.emplace_back("relu", unary_gen([](const Tensor& x) { return relu(x); }, 0.1, 2.0, true));
  gens.emplace_back("abs", unary_gen([](const Tensor& x) { return abs(x); }, 0.1, 2.0, true));
  gens.emplace_back("pow_2", unary_gen([](const Tensor& x) { return pow_k(x, 2); }, -2.0, 2.0, false));
  gens.emplace_back("pow_3", unary_gen([](const Tensor& x) { return pow_k(x, 3); }, -2.0, 2.0, false));
  gens.emplace_back("log", unary_gen([](const Tensor& x) { return log(x); }, 0.1, 3.0, false));
  gens.emplace_back("exp", unary_gen([](const Tensor& x) { return exp(x); }, -2.0, 2.0, false));

  const auto reduce_gen = [](std::function<Tensor(const Tensor&, int)> axis_op,
                             std::function<Tensor(const Tensor&)> full_op, double lo,
                             double hi, bool sign) {
    return [axis_op = std::move(axis_op), full_op = std::move(full_op), lo, hi,
            sign](Rng& rng) {
      const int r = dim(rng), ccol = dim(rng);
      const int mode = static_cast<int>(rng.bounded(3));  // full, axis0, axis1
      SuiteCase c;
      c.shapes = {{r, ccol}};
      c.values = {sign ? draw_signed(rng, numel_of(c.shapes[0]), lo, hi)
                       : draw(rng, numel_of(c.shapes[0]), lo, hi)};
      const int out_len = mode == 1 ? ccol : r;
      if (mode == 0) {
        auto w = draw(rng, 1, -1.0, 1.0);
        c.fn = [full_op, w](const std::vector<Tensor>& l) {
          return mul(full_op(l[0]), Tensor::scalar(w[0]));
        };
      } else {
        const int axis = mode == 1 ? 0 : 1;
        c.fn = weighted([axis_op, axis](const std::vector<Tensor>& l) {
                          return axis_op(l[0], axis);
                        },
                        draw(rng, static_cast<std::size_t>(out_len), -1.0, 1.0), {out_len});
      }
      return c;
    };
  };
  gens.emplace_back("sum", reduce_gen([](const Tensor& x, int a) { return sum(x, a); },
                                      [](const Tensor& x) { return sum(x); }, -2.0, 2.0,
                                      false));
  gens.emplace_back("mean", reduce_gen([](const Tensor& x, int a) { return mean(x, a); },
                                       [](const Tensor& x) { return mean(x); }, -2.0, 2.0,
                                       false));
  gens.emplace_back("l2_norm",
                    reduce_gen([](const Tensor& x, int a) { return l2_norm(x, a); },
                               [](const Tensor& x) { return l2_norm(x); }, 0.3, 2.0, true));

  gens.emplace_back("add_bias", [](Rng& rng) {
    const int r = dim(rng), ccol = dim(rng);
    SuiteCase c;
    c.shapes = {{r, ccol}, {ccol}};
    c.values = {draw(rng, numel_of(c.shapes[0]), -2.0, 2.0),
                draw(rng, numel_of(c.shapes[1]), -2.0, 2.0)};
    c.fn = weighted([](const std::vector<Tensor>& l) { return add_bias(l[0], l[1]); },
                    draw(rng, static_cast<std::size_t>(r) * ccol, -1.0, 1.0), {r, ccol});
    return c;
  });

  gens.emplace_back("softmax_rows", [](Rng& rng) {
    const int r = dim(rng), ccol = dim(rng);
    SuiteCase c;
    c.shapes = {{r, ccol}};
    c.values = {draw(rng, numel_of(c.shapes[0]), -2.0, 2.0)};
    c.fn = weighted([](const std::vector<Tensor>& l) { return softmax_rows(l[0]); },
                    draw(rng, static_cast<std::size_t>(r) * ccol, -1.0, 1.0), {r, ccol});
    return c;
  });

  gens.emplace_back("softmax_cross_entropy", [](Rng& rng) {
    const int b = dim(rng), ccol = dim(rng);
    std::vector<int> labels;
    for (int i = 0; i < b; ++i) {
      labels.push_back(static_cast<int>(rng.bounded(static_cast<std::uint64_t>(ccol))));
    }
    SuiteCase c;
    c.shapes = {{b, ccol}};
    c.values = {draw(rng, numel_of(c.shapes[0]), -2.0, 2.0)};
    c.fn = [labels](const std::vector<Tensor>& l) {
      return softmax_cross_entropy(l[0], labels);
    };
    return c;
  });

  gens.emplace_back("md_squared", [](Rng& rng) {
    const int b = 3, d = 2;
    SuiteCase c;
    c.shapes = {{b, d}, {b, d}, {b, d}};
    // Distinct per-batch offsets keep moment gaps away from the norm kink.
    c.values = {draw(rng, 6, -1.0, 1.0), draw(rng, 6, 0.5, 2.5), draw(rng, 6, -2.5, -0.5)};
    c.fn = [](const std::vector<Tensor>& l) {
      MomentConfig cfg;
      return md_squared({l[0], l[1]}, l[2], cfg);
    };
    return c;
  });

  gens.emplace_back("m3sda_objective", [](Rng& rng) {
    // 3-sample, 2-feature task through G = [2 -> 4 -> 3] and two heads.
    const int b = 3, in = 2, h1 = 4, feat = 3, n_classes = 3;
    SuiteCase c;
    c.shapes = {{in, h1}, {h1}, {h1, feat}, {feat},
                {feat, n_classes}, {n_classes}, {feat, n_classes}, {n_classes}};
    for (const auto& s : c.shapes) c.values.push_back(std::vector<double>());
    const double a1 = std::sqrt(6.0 / (in + h1));
    const double a2 = std::sqrt(6.0 / (h1 + feat));
    const double a3 = std::sqrt(6.0 / (feat + n_classes));
    c.values[0] = draw(rng, numel_of(c.shapes[0]), -a1, a1);
    c.values[1] = draw(rng, numel_of(c.shapes[1]), -0.1, 0.1);
    c.values[2] = draw(rng, numel_of(c.shapes[2]), -a2, a2);
    c.values[3] = draw(rng, numel_of(c.shapes[3]), -0.1, 0.1);
    c.values[4] = draw(rng, numel_of(c.shapes[4]), -a3, a3);
    c.values[5] = draw(rng, numel_of(c.shapes[5]), -0.1, 0.1);
    c.values[6] = draw(rng, numel_of(c.shapes[6]), -a3, a3);
    c.values[7] = draw(rng, numel_of(c.shapes[7]), -0.1, 0.1);

    const auto x1 = draw(rng, static_cast<std::size_t>(b) * in, -1.0, 1.0);
    const auto x2 = draw(rng, static_cast<std::size_t>(b) * in, 0.0, 2.0);
    const auto xt = draw(rng, static_cast<std::size_t>(b) * in, -2.0, 0.0);
    std::vector<int> y1, y2;
    for (int i = 0; i < b; ++i) {
      y1.push_back(static_cast<int>(rng.bounded(n_classes)));
      y2.push_back(static_cast<int>(rng.bounded(n_classes)));
    }
    c.fn = [=](const std::vector<Tensor>& l) {
      auto g_forward = [&](const std::vector<double>& xv) {
        const Tensor x = Tensor::matrix(b, in, xv);
        const Tensor h = relu(add_bias(matmul(x, l[0]), l[1]));
        return add_bias(matmul(h, l[2]), l[3]);
      };
      const Tensor f1 = g_forward(x1);
      const Tensor f2 = g_forward(x2);
      const Tensor ft = g_forward(xt);
      const Tensor ce1 = softmax_cross_entropy(add_bias(matmul(f1, l[4]), l[5]), y1);
      const Tensor ce2 = softmax_cross_entropy(add_bias(matmul(f2, l[6]), l[7]), y2);
      MomentConfig cfg;
      return add(add(ce1, ce2), 0.5 * md_squared({f1, f2}, ft, cfg));
    };
    return c;
  });

  std::vector<GradCheckResult> results;
  for (auto& [name, gen] : gens) {
    Rng rng(Rng::mix(seed, fnv1a(name)));
    GradCheckResult res;
    res.op = name;
    res.cases = cases;
    for (int t = 0; t < cases; ++t) {
      SuiteCase c = gen(rng);
      res.max_rel_err =
          std::max(res.max_rel_err, gradcheck_max_rel_err(c.fn, c.shapes, c.values));
    }
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace msda
