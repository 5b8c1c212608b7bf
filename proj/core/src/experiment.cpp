#include "msda/experiment.hpp"

#include <algorithm>
#include <set>

#include "msda/errors.hpp"
#include "vendor_json.hpp"

namespace msda {

namespace {

void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

DataConfig parse_data(const nlohmann::json& j) {
  reject_unknown_keys(j, {"scenario", "domains", "classes", "per_class", "shift_scale",
                          "rot_scale", "sources", "target", "standardize"},
                      "data");
  DataConfig cfg;
  if (j.contains("scenario")) cfg.scenario = j["scenario"].get<std::string>();
  if (cfg.scenario != "blobs" && cfg.scenario != "moons" && cfg.scenario != "csv") {
    throw ConfigError("data.scenario must be blobs, moons, or csv");
  }
  if (j.contains("domains")) cfg.domains = j["domains"].get<int>();
  if (j.contains("classes")) cfg.classes = j["classes"].get<int>();
  if (j.contains("per_class")) cfg.per_class = j["per_class"].get<int>();
  if (j.contains("shift_scale")) cfg.shift_scale = j["shift_scale"].get<double>();
  if (j.contains("rot_scale")) cfg.rot_scale = j["rot_scale"].get<double>();
  if (j.contains("sources")) cfg.sources = j["sources"].get<std::vector<std::string>>();
  if (j.contains("target")) cfg.target = j["target"].get<std::string>();
  if (j.contains("standardize")) cfg.standardize = j["standardize"].get<bool>();
  if (cfg.scenario == "csv" && (cfg.sources.empty() || cfg.target.empty())) {
    throw ConfigError("csv scenario needs data.sources and data.target");
  }
  return cfg;
}

ModelConfig parse_model(const nlohmann::json& j) {
  reject_unknown_keys(j, {"hidden"}, "model");
  ModelConfig cfg;
  if (j.contains("hidden")) cfg.hidden = j["hidden"].get<std::vector<int>>();
  if (cfg.hidden.empty()) throw ConfigError("model.hidden must be non-empty");
  return cfg;
}

TrainConfig parse_train(const nlohmann::json& j, const nlohmann::json& moments) {
  reject_unknown_keys(j, {"algorithm", "lambda", "epochs", "batch_size", "lr", "momentum",
                          "g_steps_per_cycle", "discrepancy_reduction"},
                      "train");
  TrainConfig cfg;
  if (j.contains("algorithm")) cfg.algorithm = algorithm_from_string(j["algorithm"]);
  if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
  if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
  if (j.contains("momentum")) cfg.momentum = j["momentum"].get<double>();
  if (j.contains("g_steps_per_cycle")) cfg.g_steps_per_cycle = j["g_steps_per_cycle"].get<int>();
  if (j.contains("discrepancy_reduction")) {
    const auto red = j["discrepancy_reduction"].get<std::string>();
    if (red == "mean") {
      cfg.discrepancy_reduction = DiscrepancyReduction::kMean;
    } else if (red == "sum") {
      cfg.discrepancy_reduction = DiscrepancyReduction::kSum;
    } else {
      throw ConfigError("train.discrepancy_reduction must be mean or sum");
    }
  }
  if (!moments.is_null()) {
    reject_unknown_keys(moments, {"max_order", "use_raw_elementwise_moments"}, "moments");
    if (moments.contains("max_order")) cfg.moment_cfg.max_order = moments["max_order"].get<int>();
    if (moments.contains("use_raw_elementwise_moments")) {
      cfg.moment_cfg.use_raw_elementwise_moments =
          moments["use_raw_elementwise_moments"].get<bool>();
    }
  }
  return cfg;
}

EnsembleConfig parse_ensemble(const nlohmann::json& j) {
  reject_unknown_keys(j, {"weighting"}, "ensemble");
  EnsembleConfig cfg;
  if (j.contains("weighting")) cfg.weighting = j["weighting"].get<std::string>();
  if (cfg.weighting != "accuracy" && cfg.weighting != "inverse_moment") {
    throw ConfigError("ensemble.weighting must be accuracy or inverse_moment");
  }
  return cfg;
}

}  // namespace

ExperimentConfig experiment_config_from_json_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown_keys(doc, {"format_version", "seed", "data", "model", "train", "moments",
                              "ensemble"},
                        "config");
    if (!doc.contains("seed")) throw ConfigError("config.seed is required");
    ExperimentConfig cfg;
    cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("data")) cfg.data = parse_data(doc["data"]);
    if (doc.contains("model")) cfg.model = parse_model(doc["model"]);
    cfg.train = parse_train(doc.value("train", nlohmann::json::object()),
                            doc.value("moments", nlohmann::json()));
    if (doc.contains("ensemble")) cfg.ensemble = parse_ensemble(doc["ensemble"]);
    cfg.train.seed = cfg.seed;
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

MsdaTask build_task(const DataConfig& cfg, std::uint64_t seed) {
  if (cfg.scenario == "blobs") {
    return gen_blobs(cfg.domains, cfg.classes, cfg.per_class, cfg.shift_scale,
                     cfg.rot_scale, seed);
  }
  if (cfg.scenario == "moons") {
    return gen_moons(cfg.domains, cfg.per_class, cfg.shift_scale, seed);
  }
  MsdaTask task;
  for (const auto& path : cfg.sources) task.sources.push_back(load_csv(path));
  task.target = load_csv(cfg.target);
  // CSV class counts are inferred per file; harmonize to the task-wide max.
  int n_classes = task.target.n_classes;
  for (const auto& s : task.sources) n_classes = std::max(n_classes, s.n_classes);
  for (auto& s : task.sources) s.n_classes = n_classes;
  task.target.n_classes = n_classes;
  validate_task(task);
  return task;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  MsdaTask task = build_task(cfg.data, cfg.seed);
  if (cfg.data.standardize) task = standardize(task);

  SplitSpec split_spec;
  split_spec.seed = Rng::mix(cfg.seed, 0x74737074ULL);
  auto [adapt_target, eval_target] = split(task.target, split_spec);

  MsdaTask train_task;
  train_task.sources = task.sources;
  train_task.target = adapt_target;

  const bool combine = cfg.train.algorithm == Algorithm::kSourceCombine;
  const bool pairs = cfg.train.algorithm == Algorithm::kM3sdaBeta;
  const int n_heads = combine ? 1 : train_task.n_sources();

  Rng init_rng(Rng::mix(cfg.seed, 0x696e6974ULL));
  ExperimentResult result;
  result.model = make_msda_model(train_task.n_features(), cfg.model.hidden,
                                 train_task.n_classes(), n_heads, pairs, init_rng);
  result.trace = train(train_task, result.model, cfg.train, eval_target);

  result.eval_uniform = evaluate(result.model, eval_target,
                                 uniform_schema(result.model.n_heads()));

  EnsembleSchema weighted;
  if (combine) {
    // One head: every weighting collapses to the trivial schema.
    weighted = uniform_schema(1);
    weighted.name = "accuracy_weighted";
  } else if (cfg.ensemble.weighting == "inverse_moment") {
    weighted.name = "inverse_moment";
    std::vector<FeatureMatrix> src_feats;
    for (const auto& s : train_task.sources) src_feats.push_back(s.features);
    weighted.weights = inverse_moment_weights(src_feats, adapt_target.features);
  } else {
    weighted.name = "accuracy_weighted";
    weighted.transductive = true;
    std::vector<double> accs;
    for (int i = 0; i < train_task.n_sources(); ++i) {
      MsdaTask single;
      single.sources = {train_task.sources[static_cast<std::size_t>(i)]};
      single.target = adapt_target;
      Rng snap_rng(Rng::mix(Rng::mix(cfg.seed, 0x61636373ULL),
                            static_cast<std::uint64_t>(i)));
      MsdaModel snapshot = make_msda_model(single.n_features(), cfg.model.hidden,
                                           single.n_classes(), 1, false, snap_rng);
      TrainConfig snap_cfg = cfg.train;
      snap_cfg.algorithm = Algorithm::kSourceOnly;
      train(single, snapshot, snap_cfg, eval_target);
      accs.push_back(evaluate(snapshot, eval_target, uniform_schema(1)).accuracy);
    }
    weighted.source_only_accs = accs;
    try {
      weighted.weights = accuracy_weights(accs);
    } catch (const ValueError&) {
      weighted.weights = uniform_weights(train_task.n_sources());  // degenerate fallback
    }
  }
  result.eval_weighted = evaluate(result.model, eval_target, weighted);
  return result;
}

std::string metrics_json_string(const ExperimentConfig& cfg, const ExperimentResult& result) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["algorithm"] = algorithm_name(cfg.train.algorithm);
  doc["seed"] = cfg.seed;
  doc["lambda"] = cfg.train.lambda;
  doc["trace"] = nlohmann::ordered_json::parse(to_json_string(result.trace));
  doc["eval"] = {
      {"uniform", nlohmann::ordered_json::parse(to_json_string(result.eval_uniform))},
      {"weighted", nlohmann::ordered_json::parse(to_json_string(result.eval_weighted))},
  };
  return doc.dump(2) + "\n";
}

}  // namespace msda
