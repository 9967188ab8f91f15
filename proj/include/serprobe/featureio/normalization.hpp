#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "serprobe/featureio/manifest.hpp"

namespace serprobe {

enum class NormMode { speaker, global };

std::string to_string(NormMode mode);
NormMode parse_norm_mode(const std::string& text);

inline constexpr double kStdEpsilon = 1e-8;
inline constexpr const char* kGlobalKey = "global";

// Running per-dimension moments (count, mean, sum of squared deviations) in
// float64. merge() is the pairwise update of Chan et al., so partial results
// over disjoint utterance sets can be combined in any grouping.
class MomentAccumulator {
 public:
  void add(const FeatureRecord& record);
  void merge(const MomentAccumulator& other);

  std::size_t num_layers() const { return mean_.size(); }
  double count() const { return count_; }
  const Eigen::VectorXd& mean(std::size_t layer) const { return mean_[layer]; }
  // Population standard deviation, clamped below at kStdEpsilon.
  Eigen::VectorXd stddev(std::size_t layer) const;

 private:
  double count_ = 0.0;
  std::vector<Eigen::VectorXd> mean_;
  std::vector<Eigen::VectorXd> m2_;
};

struct LayerStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

struct NormStats {
  NormMode mode = NormMode::speaker;
  std::map<std::string, std::vector<LayerStats>> per_key;

  // Speaker id in speaker mode, "global" otherwise.
  std::string key_for(const FeatureRecord& record) const;
  const std::vector<LayerStats>& at(const std::string& key) const;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

NormStats compute_norm_stats(std::span<const FeatureRecord* const> records, NormMode mode);

enum class Stream { primary, aux };

// Statistics over the utterances whose corpus indices are listed in scope.
// Speaker mode is meant to see every utterance of each speaker, global mode
// only the training partition; the caller chooses the scope accordingly.
NormStats compute_norm_stats(const Corpus& corpus, NormMode mode,
                             std::span<const std::size_t> scope, Stream stream = Stream::primary);

// out[l][t][j] = (in[l][t][j] - mean[l][j]) / std[l][j]
FeatureRecord apply_normalization(const FeatureRecord& record, const NormStats& stats);

struct Normalizer {
  NormStats primary;
  std::optional<NormStats> aux;
};

}  // namespace serprobe
