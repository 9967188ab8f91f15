#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "serprobe/eval/folds.hpp"
#include "serprobe/eval/metrics.hpp"
#include "serprobe/featureio/normalization.hpp"
#include "serprobe/nn/model.hpp"
#include "serprobe/optim/trainer.hpp"

namespace serprobe::eval {

struct ExperimentSpec {
  std::string label = "experiment";  // row name in result tables
  // variant, hidden and dropout are taken from here; L, D, D_aux and C are
  // filled in from the corpus.
  nn::ModelConfig model;
  optim::TrainConfig train;
  ProtocolSpec protocol;
  NormMode norm = NormMode::speaker;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int jobs = 1;
};

nlohmann::json to_json(const ExperimentSpec& spec);

struct LayerWeights {
  bool aggregating = false;  // false for single-stream models (L = 1)
  std::vector<double> raw;
  std::vector<double> normalized;  // raw_i / sum_j raw_j
};

// Layer index 0 is the local-encoder stream.
LayerWeights report_layer_weights(const nn::ParamSet<float>& params);
std::string layer_weights_csv(const LayerWeights& weights);

struct RunResult {
  int fold_id = 0;
  std::uint64_t seed = 0;
  std::size_t num_train = 0, num_val = 0, num_test = 0;
  ConfusionMatrix confusion;
  RecallSummary recall;
  LayerWeights weights;
  optim::TrainHistory history;
  nn::ParamSet<float> params;
};

struct FoldAggregate {
  int fold_id = 0;
  std::string test_group;
  std::string val_group;
  double mean_uar = 0.0;
  double std_uar = 0.0;
};

struct SeedAggregate {
  std::uint64_t seed = 0;
  double pooled_uar = 0.0;  // mean of this seed's fold UARs
};

struct RunReport {
  ExperimentSpec spec;    // effective configuration
  nn::ModelConfig model;  // with corpus-derived dimensions
  std::vector<std::string> label_names;
  std::vector<RunResult> runs;  // ordered by (fold, seed)
  std::vector<FoldAggregate> folds;
  std::vector<SeedAggregate> seeds;
  double mean_uar = 0.0;  // mean of pooled per-seed UARs
  double std_uar = 0.0;   // population std of pooled per-seed UARs
  std::vector<double> mean_normalized_alpha;
  std::vector<double> std_normalized_alpha;
};

class ExperimentError : public Error {
 public:
  ExperimentError(const std::string& what, int fold, std::uint64_t seed)
      : Error(what), fold_id(fold), seed(seed) {}
  int fold_id;
  std::uint64_t seed;
};

// Population mean and standard deviation.
std::pair<double, double> mean_and_std(std::span<const double> values);

// Trains and tests every (fold, seed) pair and aggregates the results.
// Speaker-mode statistics come from all of a speaker's utterances; global-mode
// statistics from the fold's training and validation partitions only.
RunReport run_experiment(const Corpus& corpus, const ExperimentSpec& spec);

// Normalizer for one fold under the given mode.
Normalizer fold_normalizer(const Corpus& corpus, const FoldSpec& fold, NormMode mode, bool with_aux);

}  // namespace serprobe::eval
