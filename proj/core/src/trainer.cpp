#include "msda/trainer.hpp"

#include <cmath>
#include <iostream>

#include "msda/ensemble.hpp"
#include "msda/errors.hpp"
#include "vendor_json.hpp"

namespace msda {

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "source_only") return Algorithm::kSourceOnly;
  if (name == "source_combine") return Algorithm::kSourceCombine;
  if (name == "m3sda") return Algorithm::kM3sda;
  if (name == "m3sda_beta") return Algorithm::kM3sdaBeta;
  if (name == "ss_only") return Algorithm::kSsOnly;
  if (name == "st_only") return Algorithm::kStOnly;
  throw ConfigError("unknown algorithm '" + name + "'");
}

std::string algorithm_name(Algorithm algo) {
  switch (algo) {
    case Algorithm::kSourceOnly: return "source_only";
    case Algorithm::kSourceCombine: return "source_combine";
    case Algorithm::kM3sda: return "m3sda";
    case Algorithm::kM3sdaBeta: return "m3sda_beta";
    case Algorithm::kSsOnly: return "ss_only";
    case Algorithm::kStOnly: return "st_only";
  }
  throw ConfigError("unknown algorithm");
}

SgdMomentum::SgdMomentum(std::vector<Tensor> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p.numel(), 0.0);
}

void SgdMomentum::step() {
  for (std::size_t t = 0; t < params_.size(); ++t) {
    auto& p = params_[t].mutable_data();
    const auto& g = params_[t].grad();
    auto& v = velocity_[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      p[i] -= lr_ * v[i];
    }
  }
}

std::vector<int> epoch_permutation(std::uint64_t seed, int epoch, int n) {
  Rng rng(Rng::mix(Rng::mix(seed, 0x7065726dULL),
                   Rng::mix(static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(n))));
  return rng.permutation(n);
}

std::vector<int> batch_indices(const std::vector<int>& perm, int step, int batch_size) {
  const int n = static_cast<int>(perm.size());
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  const std::int64_t start = static_cast<std::int64_t>(step) * batch_size;
  for (int t = 0; t < batch_size; ++t) {
    out.push_back(perm[static_cast<std::size_t>((start + t) % n)]);
  }
  return out;
}

MsdaTask combine_sources(const MsdaTask& task) {
  validate_task(task);
  MsdaTask out;
  out.target = task.target;
  out.target_labels_visible_for_eval_only = task.target_labels_visible_for_eval_only;
  DomainDataset pooled;
  pooled.name = "combined";
  pooled.n_classes = task.n_classes();
  pooled.features.cols = task.n_features();
  for (const auto& s : task.sources) {
    pooled.features.v.insert(pooled.features.v.end(), s.features.v.begin(),
                             s.features.v.end());
    pooled.labels.insert(pooled.labels.end(), s.labels.begin(), s.labels.end());
    pooled.features.rows += s.n_samples();
  }
  out.sources.push_back(std::move(pooled));
  return out;
}

namespace {

void validate_train_inputs(const MsdaTask& task, const MsdaModel& model,
                           const TrainConfig& cfg) {
  validate_task(task);
  if (cfg.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.batch_size < 2) {
    std::cerr << "warning: batch_size=1 makes minibatch moments degenerate\n";
  }
  if (cfg.lr < 0.0) throw ConfigError("lr must be >= 0");
  if (cfg.g_steps_per_cycle < 1) throw ConfigError("g_steps_per_cycle must be >= 1");
  if (model.n_classes != task.n_classes()) {
    throw ConfigError("model and task disagree on class count");
  }
  if (model.g.in_width() != task.n_features()) {
    throw ConfigError("model and task disagree on feature width");
  }
  const bool needs_pairs = cfg.algorithm == Algorithm::kM3sdaBeta;
  if (needs_pairs && !model.has_pairs()) {
    throw ConfigError("m3sda_beta requires paired classifiers");
  }
  if (!needs_pairs && model.has_pairs()) {
    throw ConfigError("paired classifiers are only valid for m3sda_beta");
  }
  if (cfg.algorithm == Algorithm::kSsOnly && task.n_sources() < 2) {
    throw ConfigError("ss_only needs at least two sources");
  }
  if (model.n_heads() != task.n_sources()) {
    throw ConfigError("model needs one classifier head per source");
  }
}

bool algorithm_uses_md(Algorithm a) {
  return a == Algorithm::kM3sda || a == Algorithm::kM3sdaBeta ||
         a == Algorithm::kSsOnly || a == Algorithm::kStOnly ||
         a == Algorithm::kSourceCombine;
}

Tensor select_md_term(const MdTerms& terms, Algorithm a) {
  if (a == Algorithm::kSsOnly) return terms.source_source;
  if (a == Algorithm::kStOnly) return terms.source_target;
  return terms.full;
}

void zero_all(const std::vector<Tensor>& params) {
  for (auto p : params) p.zero_grad();
}

struct EpochDiagnostics {
  double md = 0.0;
  std::vector<double> head_ce;
  std::vector<double> paired_ce;
  std::vector<double> pair_disc;
  double target_acc = 0.0;
};

// Full-data forward diagnostics; no parameter updates happen here.
EpochDiagnostics evaluate_epoch(const MsdaTask& task, const MsdaModel& model,
                                const TrainConfig& cfg, const DomainDataset& eval_ds) {
  EpochDiagnostics diag;
  const int n = task.n_sources();
  std::vector<Tensor> src_feats;
  for (int i = 0; i < n; ++i) {
    const auto& ds = task.sources[static_cast<std::size_t>(i)];
    Tensor feats = forward_features(model, features_tensor(ds));
    src_feats.push_back(feats);
    diag.head_ce.push_back(softmax_cross_entropy(classify(model, i, feats), ds.labels).item());
    if (model.has_pairs()) {
      diag.paired_ce.push_back(
          softmax_cross_entropy(classify_paired(model, i, feats), ds.labels).item());
    }
  }
  const Tensor tgt_feats = forward_features(model, features_tensor(task.target));
  diag.md = md_squared(src_feats, tgt_feats, cfg.moment_cfg).item();
  if (model.has_pairs()) {
    for (int i = 0; i < n; ++i) {
      diag.pair_disc.push_back(discrepancy(softmax_rows(classify(model, i, tgt_feats)),
                                           softmax_rows(classify_paired(model, i, tgt_feats)),
                                           cfg.discrepancy_reduction)
                                   .item());
    }
  }
  diag.target_acc = evaluate(model, eval_ds, uniform_schema(model.n_heads())).accuracy;
  return diag;
}

void append_row(TrainTrace& trace, int epoch, const EpochDiagnostics& diag,
                const MsdaModel& model) {
  trace.epochs.push_back(epoch);
  trace.md.push_back(diag.md);
  for (int i = 0; i < model.n_heads(); ++i) {
    trace.train_err["C" + std::to_string(i + 1)].push_back(
        diag.head_ce[static_cast<std::size_t>(i)]);
    if (model.has_pairs()) {
      trace.train_err["C" + std::to_string(i + 1) + "p"].push_back(
          diag.paired_ce[static_cast<std::size_t>(i)]);
      trace.disc["C" + std::to_string(i + 1)].push_back(
          diag.pair_disc[static_cast<std::size_t>(i)]);
    }
  }
  trace.target_acc.push_back(diag.target_acc);
}

struct StepBatches {
  std::vector<Tensor> src_x;
  std::vector<std::vector<int>> src_y;
  Tensor tgt_x;
};

StepBatches gather_batches(const MsdaTask& task, const TrainConfig& cfg,
                           const std::vector<std::vector<int>>& src_perms,
                           const std::vector<int>& tgt_perm, int step) {
  StepBatches b;
  for (int i = 0; i < task.n_sources(); ++i) {
    const auto idx = batch_indices(src_perms[static_cast<std::size_t>(i)], step,
                                   cfg.batch_size);
    b.src_x.push_back(rows_tensor(task.sources[static_cast<std::size_t>(i)], idx));
    b.src_y.push_back(labels_at(task.sources[static_cast<std::size_t>(i)], idx));
  }
  b.tgt_x = rows_tensor(task.target, batch_indices(tgt_perm, step, cfg.batch_size));
  return b;
}

}  // namespace

TrainTrace train(const MsdaTask& raw_task, MsdaModel& model, const TrainConfig& cfg,
                 const DomainDataset& eval_ds, const TrainHooks* hooks) {
  const auto notify = [hooks](int epoch, int step, TrainPhase phase) {
    if (hooks && hooks->after_phase) hooks->after_phase(epoch, step, phase);
  };
  const bool combine = cfg.algorithm == Algorithm::kSourceCombine;
  const MsdaTask task = combine ? combine_sources(raw_task) : raw_task;
  validate_train_inputs(task, model, cfg);

  const int n = task.n_sources();
  const bool use_md = algorithm_uses_md(cfg.algorithm) && cfg.lambda != 0.0;
  const bool beta = cfg.algorithm == Algorithm::kM3sdaBeta;

  int max_n = 0;
  for (const auto& s : task.sources) max_n = std::max(max_n, s.n_samples());
  const int steps_per_epoch = (max_n + cfg.batch_size - 1) / cfg.batch_size;

  SgdMomentum opt_g(model.g_params(), cfg.lr, cfg.momentum);
  SgdMomentum opt_heads(model.head_params(), cfg.lr, cfg.momentum);
  const auto all_params = model.all_params();

  TrainTrace trace;
  append_row(trace, 0, evaluate_epoch(task, model, cfg, eval_ds), model);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::vector<int>> src_perms;
    for (const auto& s : task.sources) {
      src_perms.push_back(epoch_permutation(cfg.seed, epoch, s.n_samples()));
    }
    const auto tgt_perm = epoch_permutation(cfg.seed, epoch, task.target.n_samples());

    for (int step = 0; step < steps_per_epoch; ++step) {
      const auto b = gather_batches(task, cfg, src_perms, tgt_perm, step);

      if (!beta) {
        std::vector<Tensor> feats;
        Tensor loss;
        for (int i = 0; i < n; ++i) {
          feats.push_back(forward_features(model, b.src_x[static_cast<std::size_t>(i)]));
          Tensor ce = softmax_cross_entropy(classify(model, i, feats.back()),
                                            b.src_y[static_cast<std::size_t>(i)]);
          loss = loss.defined() ? add(loss, ce) : ce;
        }
        if (use_md) {
          const Tensor tgt_feats = forward_features(model, b.tgt_x);
          const auto terms = md_squared_terms(feats, tgt_feats, cfg.moment_cfg);
          loss = add(loss, cfg.lambda * select_md_term(terms, cfg.algorithm));
        }
        backward(loss);
        opt_g.step();
        opt_heads.step();
        zero_all(all_params);
        notify(epoch, step, TrainPhase::kMain);
        continue;
      }

      // Classifier-pair cycle.
      // (i) classification plus moment matching, updating G and all heads.
      {
        std::vector<Tensor> feats;
        Tensor loss;
        for (int i = 0; i < n; ++i) {
          feats.push_back(forward_features(model, b.src_x[static_cast<std::size_t>(i)]));
          Tensor ce = add(softmax_cross_entropy(classify(model, i, feats.back()),
                                                b.src_y[static_cast<std::size_t>(i)]),
                          softmax_cross_entropy(classify_paired(model, i, feats.back()),
                                                b.src_y[static_cast<std::size_t>(i)]));
          loss = loss.defined() ? add(loss, ce) : ce;
        }
        if (use_md) {
          const Tensor tgt_feats = forward_features(model, b.tgt_x);
          const auto terms = md_squared_terms(feats, tgt_feats, cfg.moment_cfg);
          loss = add(loss, cfg.lambda * terms.full);
        }
        backward(loss);
        opt_g.step();
        opt_heads.step();
        zero_all(all_params);
        notify(epoch, step, TrainPhase::kMain);
      }

      // (ii) grow pair discrepancy on the target, heads only (G frozen).
      {
        Tensor loss;
        for (int i = 0; i < n; ++i) {
          const Tensor feats =
              forward_features(model, b.src_x[static_cast<std::size_t>(i)]);
          Tensor ce = add(softmax_cross_entropy(classify(model, i, feats),
                                                b.src_y[static_cast<std::size_t>(i)]),
                          softmax_cross_entropy(classify_paired(model, i, feats),
                                                b.src_y[static_cast<std::size_t>(i)]));
          loss = loss.defined() ? add(loss, ce) : ce;
        }
        const Tensor tgt_feats = forward_features(model, b.tgt_x);
        for (int i = 0; i < n; ++i) {
          const Tensor d = discrepancy(softmax_rows(classify(model, i, tgt_feats)),
                                       softmax_rows(classify_paired(model, i, tgt_feats)),
                                       cfg.discrepancy_reduction);
          loss = sub(loss, d);
        }
        backward(loss);
        opt_heads.step();
        zero_all(all_params);
        notify(epoch, step, TrainPhase::kHeadsOnly);
      }

      // (iii) shrink pair discrepancy by moving G, heads frozen.
      for (int rep = 0; rep < cfg.g_steps_per_cycle; ++rep) {
        const Tensor tgt_feats = forward_features(model, b.tgt_x);
        Tensor loss;
        for (int i = 0; i < n; ++i) {
          const Tensor d = discrepancy(softmax_rows(classify(model, i, tgt_feats)),
                                       softmax_rows(classify_paired(model, i, tgt_feats)),
                                       cfg.discrepancy_reduction);
          loss = loss.defined() ? add(loss, d) : d;
        }
        backward(loss);
        opt_g.step();
        zero_all(all_params);
        notify(epoch, step, TrainPhase::kExtractorOnly);
      }
    }

    append_row(trace, epoch, evaluate_epoch(task, model, cfg, eval_ds), model);
  }
  return trace;
}

TrainTrace train_source_only(const MsdaTask& task, MsdaModel& model, const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.algorithm = Algorithm::kSourceOnly;
  return train(task, model, c, task.target);
}

TrainTrace train_m3sda(const MsdaTask& task, MsdaModel& model, const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.algorithm = Algorithm::kM3sda;
  return train(task, model, c, task.target);
}

TrainTrace train_m3sda_beta(const MsdaTask& task, MsdaModel& model, const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.algorithm = Algorithm::kM3sdaBeta;
  return train(task, model, c, task.target);
}

TrainTrace train_ablation(const MsdaTask& task, MsdaModel& model, const TrainConfig& cfg) {
  if (cfg.algorithm != Algorithm::kSsOnly && cfg.algorithm != Algorithm::kStOnly) {
    throw ConfigError("train_ablation expects ss_only or st_only");
  }
  return train(task, model, cfg, task.target);
}

TrainTrace train_source_combine(const MsdaTask& task, MsdaModel& model,
                                const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.algorithm = Algorithm::kSourceCombine;
  return train(task, model, c, task.target);
}

std::string to_json_string(const TrainTrace& trace) {
  nlohmann::ordered_json doc;
  doc["epochs"] = trace.epochs;
  doc["md"] = trace.md;
  doc["train_err"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : trace.train_err) doc["train_err"][k] = v;
  doc["disc"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : trace.disc) doc["disc"][k] = v;
  doc["target_acc"] = trace.target_acc;
  return doc.dump(2) + "\n";
}

}  // namespace msda
