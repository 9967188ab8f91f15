#include "serprobe/eval/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

namespace serprobe::eval {

nlohmann::json to_json(const ExperimentSpec& spec) {
  nlohmann::json model = {{"variant", nn::to_string(spec.model.variant)},
                          {"hidden", spec.model.hidden},
                          {"dropout", spec.model.dropout}};
  return {{"label", spec.label},
          {"model", model},
          {"train", optim::to_json(spec.train)},
          {"protocol", {{"name", to_string(spec.protocol.kind)},
                        {"folds", spec.protocol.folds},
                        {"seed", spec.protocol.seed}}},
          {"norm", to_string(spec.norm)},
          {"seeds", spec.seeds}};
}

LayerWeights report_layer_weights(const nn::ParamSet<float>& params) {
  LayerWeights w;
  const Vector<double> alpha = params.at(nn::param::alpha).col(0).cast<double>();
  w.raw.assign(alpha.data(), alpha.data() + alpha.size());
  w.aggregating = alpha.size() > 1;
  const Vector<double> normalized = alpha / nn::alpha_sum(alpha);
  w.normalized.assign(normalized.data(), normalized.data() + normalized.size());
  return w;
}

std::string layer_weights_csv(const LayerWeights& weights) {
  std::ostringstream out;
  out << "layer_index,raw_alpha,normalized_alpha\n";
  out.precision(9);
  for (std::size_t i = 0; i < weights.raw.size(); ++i) {
    out << i << ',' << weights.raw[i] << ',' << weights.normalized[i] << '\n';
  }
  return out.str();
}

std::pair<double, double> mean_and_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

namespace {

std::vector<std::size_t> all_indices(const Corpus& corpus) {
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

nn::ModelConfig resolve_model(const Corpus& corpus, const nn::ModelConfig& requested) {
  if (corpus.size() == 0) throw ValidationError("corpus has no utterances");
  nn::ModelConfig m = requested;
  const auto first = corpus.store->features(0);
  m.num_layers = static_cast<int>(first->num_layers);
  m.input_dim = static_cast<int>(first->dim);
  m.num_classes = static_cast<int>(corpus.manifest.num_classes());
  if (m.variant == nn::Variant::fusion) {
    const auto aux = corpus.store->aux(0);
    if (!aux) throw ValidationError("fusion model needs aux_feature_path on every manifest entry");
    m.aux_dim = static_cast<int>(aux->dim);
  } else {
    m.aux_dim = 0;
  }
  nn::validate(m);
  return m;
}

}  // namespace

Normalizer fold_normalizer(const Corpus& corpus, const FoldSpec& fold, NormMode mode, bool with_aux) {
  std::vector<std::size_t> scope;
  if (mode == NormMode::speaker) {
    scope = all_indices(corpus);
  } else {
    scope = fold.train;
    scope.insert(scope.end(), fold.val.begin(), fold.val.end());
  }
  Normalizer n{compute_norm_stats(corpus, mode, scope, Stream::primary), std::nullopt};
  if (with_aux) n.aux = compute_norm_stats(corpus, mode, scope, Stream::aux);
  return n;
}

RunReport run_experiment(const Corpus& corpus, const ExperimentSpec& spec) {
  if (spec.seeds.empty()) throw ValidationError("seeds must not be empty");
  optim::validate(spec.train);
  RunReport report;
  report.spec = spec;
  report.model = resolve_model(corpus, spec.model);
  report.label_names = corpus.manifest.label_names;
  const bool fusion = report.model.variant == nn::Variant::fusion;

  const auto folds = make_folds(corpus.manifest, spec.protocol);
  std::vector<Normalizer> normalizers;
  if (spec.norm == NormMode::speaker) {
    // Same statistics for every fold.
    normalizers.assign(folds.size(), fold_normalizer(corpus, folds[0], spec.norm, fusion));
  } else {
    for (const auto& f : folds) normalizers.push_back(fold_normalizer(corpus, f, spec.norm, fusion));
  }

  struct Task {
    std::size_t fold;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (auto s : spec.seeds) tasks.push_back({f, s});
  }
  std::vector<RunResult> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());

  auto run_task = [&](std::size_t t) {
    const auto& fold = folds[tasks[t].fold];
    const auto seed = tasks[t].seed;
    auto make_set = [&](const std::vector<std::size_t>& idx) {
      return optim::ExampleSet{corpus.store.get(), &normalizers[tasks[t].fold], idx, fusion};
    };
    const auto train_set = make_set(fold.train);
    const auto val_set = make_set(fold.val);
    const auto test_set = make_set(fold.test);
    optim::TrainConfig cfg = spec.train;
    cfg.seed = seed;
    cfg.log_prefix = "[fold=" + std::to_string(fold.fold_id) + " seed=" + std::to_string(seed) + "] ";
    auto trained = optim::train(report.model, train_set, val_set, cfg);
    const auto ev = optim::evaluate(report.model, trained.params, test_set, cfg.max_frames, cfg.batch_size);

    RunResult& r = results[t];
    r.fold_id = fold.fold_id;
    r.seed = seed;
    r.num_train = fold.train.size();
    r.num_val = fold.val.size();
    r.num_test = fold.test.size();
    r.confusion = confusion_matrix(ev.preds, ev.labels, report.model.num_classes);
    r.recall = recall_summary(r.confusion);
    if (!r.recall.excluded_classes.empty() && spec.train.log_progress) {
      std::cerr << (cfg.log_prefix + "warning: " + std::to_string(r.recall.excluded_classes.size()) +
                    " classes absent from the test set were excluded from UAR\n");
    }
    r.weights = report_layer_weights(trained.params);
    r.history = std::move(trained.history);
    r.params = std::move(trained.params);
  };

  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, spec.jobs)), 1, tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        run_task(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (!errors[t]) continue;
    const int fold_id = folds[tasks[t].fold].fold_id;
    try {
      std::rethrow_exception(errors[t]);
    } catch (const std::exception& e) {
      throw ExperimentError("fold " + std::to_string(fold_id) + " seed " +
                                std::to_string(tasks[t].seed) + ": " + e.what(),
                            fold_id, tasks[t].seed);
    }
  }
  report.runs = std::move(results);

  // Aggregates. Runs are laid out fold-major, seed-minor.
  const std::size_t S = spec.seeds.size();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<double> uars;
    for (std::size_t s = 0; s < S; ++s) uars.push_back(report.runs[f * S + s].recall.uar);
    const auto [mean, sd] = mean_and_std(uars);
    report.folds.push_back({folds[f].fold_id, folds[f].test_group, folds[f].val_group, mean, sd});
  }
  std::vector<double> pooled;
  for (std::size_t s = 0; s < S; ++s) {
    double sum = 0.0;
    for (std::size_t f = 0; f < folds.size(); ++f) sum += report.runs[f * S + s].recall.uar;
    pooled.push_back(sum / static_cast<double>(folds.size()));
    report.seeds.push_back({spec.seeds[s], pooled.back()});
  }
  std::tie(report.mean_uar, report.std_uar) = mean_and_std(pooled);

  const std::size_t L = static_cast<std::size_t>(report.model.num_layers);
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<double> w;
    for (const auto& r : report.runs) w.push_back(r.weights.normalized[l]);
    const auto [mean, sd] = mean_and_std(w);
    report.mean_normalized_alpha.push_back(mean);
    report.std_normalized_alpha.push_back(sd);
  }
  return report;
}

}  // namespace serprobe::eval
