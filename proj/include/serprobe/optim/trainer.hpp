#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "serprobe/featureio/normalization.hpp"
#include "serprobe/nn/model.hpp"
#include "serprobe/optim/adam.hpp"

namespace serprobe::optim {

struct TrainConfig {
  std::size_t batch_size = 32;
  AdamConfig adam;
  int patience = 4;
  int max_epochs = 100;
  std::uint64_t seed = 1;
  std::size_t max_frames = 400;
  bool log_progress = false;  // epoch lines on stderr
  std::string log_prefix;
};

void validate(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

// Independent generator per purpose, so e.g. toggling dropout does not shift
// the shuffling sequence.
enum class RngStream : std::uint64_t { init = 0, shuffle = 1, dropout = 2, folds = 3 };
std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream);
std::uint64_t derive_seed(std::uint64_t seed, RngStream stream);

// A view of utterances to train or evaluate on. Labels come from the records
// returned by the store.
struct ExampleSet {
  const FeatureStore* store = nullptr;
  const Normalizer* normalizer = nullptr;  // null: features used as stored
  std::vector<std::size_t> indices;
  bool use_aux = false;

  std::size_t size() const { return indices.size(); }
};

// Loads, normalizes and pads the utterances at the given positions of `set`.
Batch load_batch(const ExampleSet& set, std::span<const std::size_t> positions,
                 std::size_t max_frames, std::size_t* aux_cut = nullptr);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_uar = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool stopped_early = false;
};

nlohmann::json to_json(const TrainHistory& history);

// Tracks the minimum validation loss; should_stop() once `patience`
// consecutive epochs have failed to improve on it strictly.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when this epoch is the new best.
  bool update(int epoch, double val_loss);
  bool should_stop() const { return since_best_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct Evaluation {
  double mean_loss = 0.0;
  Eigen::MatrixXf probs;
  std::vector<int> labels;
  std::vector<int> preds;
  double uar = 0.0;
};

// Eval-mode pass over the whole set.
Evaluation evaluate(const nn::ModelConfig& model, const nn::ParamSet<float>& params,
                    const ExampleSet& set, std::size_t max_frames, std::size_t batch_size);

struct TrainResult {
  nn::ParamSet<float> params;  // from the epoch with minimum validation loss
  TrainHistory history;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

TrainResult train(const nn::ModelConfig& model, const ExampleSet& train_set,
                  const ExampleSet& val_set, const TrainConfig& cfg);

}  // namespace serprobe::optim
