#include "msda/model.hpp"

#include <cmath>

#include "msda/errors.hpp"
#include "vendor_json.hpp"

namespace msda {

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = add_bias(matmul(h, layers[l].w), layers[l].b);
    if (l + 1 < layers.size()) h = relu(h);
  }
  return h;
}

std::vector<Tensor> Mlp::params() const {
  std::vector<Tensor> out;
  for (const auto& layer : layers) {
    out.push_back(layer.w);
    out.push_back(layer.b);
  }
  return out;
}

Mlp make_mlp(const MlpSpec& spec, Rng& rng) {
  if (spec.layer_widths.size() < 2) throw ValueError("mlp needs input and output widths");
  for (int w : spec.layer_widths) {
    if (w <= 0) throw ValueError("mlp widths must be positive");
  }
  Mlp mlp;
  mlp.widths = spec.layer_widths;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const int fan_in = spec.layer_widths[l];
    const int fan_out = spec.layer_widths[l + 1];
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (auto& v : w) v = rng.uniform(-a, a);
    LinearLayer layer;
    layer.w = Tensor::matrix(fan_in, fan_out, std::move(w), /*requires_grad=*/true);
    layer.b = Tensor::zeros({fan_out}, /*requires_grad=*/true);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

std::vector<Tensor> MsdaModel::head_params() const {
  std::vector<Tensor> out;
  for (const auto& c : classifiers) {
    for (auto& p : c.params()) out.push_back(p);
  }
  for (const auto& c : paired_classifiers) {
    for (auto& p : c.params()) out.push_back(p);
  }
  return out;
}

std::vector<Tensor> MsdaModel::all_params() const {
  std::vector<Tensor> out = g_params();
  for (auto& p : head_params()) out.push_back(p);
  return out;
}

MsdaModel make_msda_model(int in_width, const std::vector<int>& hidden, int n_classes,
                          int n_heads, bool with_pairs, Rng& rng) {
  if (n_classes < 2) throw ValueError("model needs at least two classes");
  if (n_heads < 1) throw ValueError("model needs at least one classifier head");
  if (hidden.empty()) throw ValueError("feature extractor needs at least one layer");

  MsdaModel model;
  model.n_classes = n_classes;
  MlpSpec g_spec;
  g_spec.layer_widths.push_back(in_width);
  for (int w : hidden) g_spec.layer_widths.push_back(w);
  model.g = make_mlp(g_spec, rng);

  MlpSpec head_spec;
  head_spec.layer_widths = {model.g.out_width(), n_classes};
  for (int i = 0; i < n_heads; ++i) model.classifiers.push_back(make_mlp(head_spec, rng));
  if (with_pairs) {
    // Independent draws: a pair with identical weights would have zero
    // output discrepancy everywhere.
    for (int i = 0; i < n_heads; ++i) {
      model.paired_classifiers.push_back(make_mlp(head_spec, rng));
    }
  }
  return model;
}

Tensor forward_features(const MsdaModel& model, const Tensor& batch) {
  if (batch.cols() != model.g.in_width()) {
    throw ShapeError("forward_features: batch width does not match extractor input");
  }
  return model.g.forward(batch);
}

Tensor classify(const MsdaModel& model, int head_index, const Tensor& features) {
  if (head_index < 0 || head_index >= model.n_heads()) {
    throw IndexError("classify: head index out of range");
  }
  return model.classifiers[static_cast<std::size_t>(head_index)].forward(features);
}

Tensor classify_paired(const MsdaModel& model, int head_index, const Tensor& features) {
  if (head_index < 0 || head_index >= static_cast<int>(model.paired_classifiers.size())) {
    throw IndexError("classify_paired: head index out of range");
  }
  return model.paired_classifiers[static_cast<std::size_t>(head_index)].forward(features);
}

Tensor discrepancy(const Tensor& p, const Tensor& p_prime, DiscrepancyReduction reduction) {
  if (p.shape() != p_prime.shape()) throw ShapeError("discrepancy: shapes disagree");
  const int r = p.rows(), c = p.cols();
  for (int i = 0; i < r; ++i) {
    double s = 0.0, s2 = 0.0;
    for (int j = 0; j < c; ++j) {
      s += p.at(i, j);
      s2 += p_prime.at(i, j);
    }
    if (std::fabs(s - 1.0) > 1e-6 || std::fabs(s2 - 1.0) > 1e-6) {
      throw ValueError("discrepancy: inputs must be softmax outputs (rows sum to 1)");
    }
  }
  const Tensor d = abs(sub(p, p_prime));
  return reduction == DiscrepancyReduction::kMean ? mean(d) : sum(d);
}

namespace {

nlohmann::ordered_json mlp_to_json(const Mlp& mlp) {
  nlohmann::ordered_json j;
  j["widths"] = mlp.widths;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& layer : mlp.layers) {
    j["layers"].push_back({{"w", layer.w.data()}, {"b", layer.b.data()}});
  }
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp mlp;
  mlp.widths = j.at("widths").get<std::vector<int>>();
  const auto& layers = j.at("layers");
  for (std::size_t l = 0; l + 1 < mlp.widths.size(); ++l) {
    const int fan_in = mlp.widths[l];
    const int fan_out = mlp.widths[l + 1];
    LinearLayer layer;
    layer.w = Tensor::matrix(fan_in, fan_out,
                             layers.at(l).at("w").get<std::vector<double>>(),
                             /*requires_grad=*/true);
    layer.b = Tensor::from_data({fan_out}, layers.at(l).at("b").get<std::vector<double>>(),
                                /*requires_grad=*/true);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

}  // namespace

std::string to_json_string(const MsdaModel& model) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["n_classes"] = model.n_classes;
  doc["g"] = mlp_to_json(model.g);
  doc["classifiers"] = nlohmann::ordered_json::array();
  for (const auto& c : model.classifiers) doc["classifiers"].push_back(mlp_to_json(c));
  if (model.has_pairs()) {
    doc["paired_classifiers"] = nlohmann::ordered_json::array();
    for (const auto& c : model.paired_classifiers) {
      doc["paired_classifiers"].push_back(mlp_to_json(c));
    }
  }
  return doc.dump(2) + "\n";
}

MsdaModel model_from_json_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  try {
    MsdaModel model;
    model.n_classes = doc.at("n_classes").get<int>();
    model.g = mlp_from_json(doc.at("g"));
    for (const auto& c : doc.at("classifiers")) model.classifiers.push_back(mlp_from_json(c));
    if (doc.contains("paired_classifiers")) {
      for (const auto& c : doc.at("paired_classifiers")) {
        model.paired_classifiers.push_back(mlp_from_json(c));
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace msda
