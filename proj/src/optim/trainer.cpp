#include "serprobe/optim/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <set>

#include "serprobe/eval/metrics.hpp"

namespace serprobe::optim {

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (!(cfg.adam.learning_rate > 0.0)) throw ValidationError("train.learning_rate must be > 0");
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0)) throw ValidationError("train.beta1 must be in [0, 1)");
  if (!(cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0)) throw ValidationError("train.beta2 must be in [0, 1)");
  if (!(cfg.adam.epsilon > 0.0)) throw ValidationError("train.epsilon must be > 0");
  if (cfg.patience < 1) throw ValidationError("train.patience must be >= 1");
  if (cfg.max_epochs < 1) throw ValidationError("train.max_epochs must be >= 1");
  if (cfg.max_frames < 1) throw ValidationError("max_frames must be >= 1");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"batch_size", cfg.batch_size},
          {"learning_rate", cfg.adam.learning_rate},
          {"beta1", cfg.adam.beta1},
          {"beta2", cfg.adam.beta2},
          {"epsilon", cfg.adam.epsilon},
          {"patience", cfg.patience},
          {"max_epochs", cfg.max_epochs},
          {"max_frames", cfg.max_frames}};
}

std::uint64_t derive_seed(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream) {
  return std::mt19937_64(derive_seed(seed, stream));
}

Batch load_batch(const ExampleSet& set, std::span<const std::size_t> positions,
                 std::size_t max_frames, std::size_t* aux_cut) {
  std::vector<std::shared_ptr<const FeatureRecord>> owned;
  std::vector<std::shared_ptr<const FeatureRecord>> owned_aux;
  auto prepare = [&](std::shared_ptr<const FeatureRecord> r, const NormStats* stats) {
    if (stats == nullptr) return r;
    return std::make_shared<const FeatureRecord>(apply_normalization(*r, *stats));
  };
  for (std::size_t pos : positions) {
    const std::size_t idx = set.indices.at(pos);
    owned.push_back(prepare(set.store->features(idx), set.normalizer ? &set.normalizer->primary : nullptr));
    if (set.use_aux) {
      auto aux = set.store->aux(idx);
      if (!aux) throw TrainingError("utterance '" + owned.back()->utterance_id + "' has no aux stream");
      const NormStats* s = set.normalizer && set.normalizer->aux ? &*set.normalizer->aux : nullptr;
      owned_aux.push_back(prepare(std::move(aux), s));
    }
  }
  std::vector<const FeatureRecord*> ptrs;
  for (const auto& r : owned) ptrs.push_back(r.get());
  Batch batch = assemble_batch(std::span<const FeatureRecord* const>(ptrs), max_frames);
  if (set.use_aux) {
    std::vector<const FeatureRecord*> aux_ptrs;
    for (const auto& r : owned_aux) aux_ptrs.push_back(r.get());
    const std::size_t cut = attach_aux(batch, aux_ptrs, max_frames);
    if (aux_cut) *aux_cut += cut;
  }
  return batch;
}

nlohmann::json to_json(const TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"val_uar", e.val_uar}});
  }
  return {{"epochs", epochs}, {"best_epoch", h.best_epoch}, {"stopped_early", h.stopped_early}};
}

bool EarlyStopping::update(int epoch, double val_loss) {
  if (val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

Evaluation evaluate(const nn::ModelConfig& model, const nn::ParamSet<float>& params,
                    const ExampleSet& set, std::size_t max_frames, std::size_t batch_size) {
  if (set.size() == 0) throw TrainingError("cannot evaluate an empty set");
  Evaluation ev;
  ev.probs.resize(static_cast<Eigen::Index>(set.size()), model.num_classes);
  std::mt19937_64 unused(0);
  double loss_sum = 0.0;
  std::vector<std::size_t> positions;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    const std::size_t end = std::min(set.size(), start + batch_size);
    positions.resize(end - start);
    std::iota(positions.begin(), positions.end(), start);
    const Batch batch = load_batch(set, positions, max_frames);
    auto fwd = nn::model_forward(model, params, batch, false, unused);
    loss_sum += static_cast<double>(fwd.loss) * static_cast<double>(batch.size);
    ev.probs.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(batch.size)) = fwd.probs;
    ev.labels.insert(ev.labels.end(), batch.labels.begin(), batch.labels.end());
  }
  ev.mean_loss = loss_sum / static_cast<double>(set.size());
  ev.preds = eval::argmax_rows(ev.probs);
  ev.uar = eval::unweighted_average_recall(eval::confusion_matrix(ev.preds, ev.labels, model.num_classes));
  return ev;
}

namespace {

void check_labels(const ExampleSet& set, int num_classes, const char* which) {
  if (set.size() == 0) throw TrainingError(std::string(which) + " set is empty");
  for (std::size_t idx : set.indices) {
    const auto r = set.store->features(idx);
    if (r->label < 0 || r->label >= num_classes) {
      throw TrainingError(std::string(which) + " utterance '" + r->utterance_id + "' has label " +
                          std::to_string(r->label) + " outside [0, " +
                          std::to_string(num_classes) + ")");
    }
  }
}

}  // namespace

TrainResult train(const nn::ModelConfig& model, const ExampleSet& train_set,
                  const ExampleSet& val_set, const TrainConfig& cfg) {
  nn::validate(model);
  validate(cfg);
  if (train_set.store == nullptr || val_set.store == nullptr) throw TrainingError("missing feature store");
  check_labels(train_set, model.num_classes, "training");
  check_labels(val_set, model.num_classes, "validation");
  if (train_set.store == val_set.store) {
    const std::set<std::size_t> t(train_set.indices.begin(), train_set.indices.end());
    for (std::size_t i : val_set.indices) {
      if (t.count(i)) throw TrainingError("training and validation sets overlap");
    }
  }

  auto shuffle_rng = make_rng(cfg.seed, RngStream::shuffle);
  auto dropout_rng = make_rng(cfg.seed, RngStream::dropout);
  TrainResult result;
  nn::ParamSet<float> params = nn::init_params<float>(model, derive_seed(cfg.seed, RngStream::init));
  auto state = AdamState<float>::zeros_like(params);
  result.params = params;
  EarlyStopping stopper(cfg.patience);

  std::vector<std::size_t> order(train_set.size());
  std::size_t aux_cut = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> positions(order.data() + start, end - start);
      const Batch batch = load_batch(train_set, positions, cfg.max_frames, epoch == 1 ? &aux_cut : nullptr);
      auto fwd = nn::model_forward(model, params, batch, true, dropout_rng);
      const auto grads = nn::model_backward(model, params, fwd.trace);
      adam_step(params, grads, state, cfg.adam);
      loss_sum += static_cast<double>(fwd.loss) * static_cast<double>(batch.size);
    }
    if (epoch == 1 && aux_cut > 0 && cfg.log_progress) {
      std::cerr << (cfg.log_prefix + "warning: " + std::to_string(aux_cut) +
                    " training utterances had primary/aux length mismatches; cut to the shorter stream\n");
    }

    const Evaluation val = evaluate(model, params, val_set, cfg.max_frames, cfg.batch_size);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), val.mean_loss, val.uar};
    result.history.epochs.push_back(rec);
    if (stopper.update(epoch, val.mean_loss)) result.params = params;
    if (cfg.log_progress) {
      char line[256];
      std::snprintf(line, sizeof line, "epoch=%d train_loss=%.6f val_loss=%.6f val_uar=%.6f best=%d",
                    epoch, rec.train_loss, rec.val_loss, rec.val_uar, stopper.best_epoch());
      std::cerr << (cfg.log_prefix + line + '\n') << std::flush;
    }
    if (!std::isfinite(val.mean_loss)) {
      throw TrainingError("validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    if (stopper.should_stop()) {
      result.history.stopped_early = true;
      break;
    }
  }
  result.history.best_epoch = stopper.best_epoch();
  return result;
}

}  // namespace serprobe::optim
