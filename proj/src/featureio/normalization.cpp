#include "serprobe/featureio/normalization.hpp"

namespace serprobe {

std::string to_string(NormMode mode) { return mode == NormMode::speaker ? "speaker" : "global"; }

NormMode parse_norm_mode(const std::string& text) {
  if (text == "speaker") return NormMode::speaker;
  if (text == "global") return NormMode::global;
  throw ValidationError("normalization must be 'speaker' or 'global', got '" + text + "'");
}

void MomentAccumulator::add(const FeatureRecord& record) {
  // Two-pass moments of this record, then merged as a partial result.
  MomentAccumulator part;
  part.count_ = record.num_frames;
  for (std::size_t l = 0; l < record.num_layers; ++l) {
    const Eigen::MatrixXd x = record.layer(l).cast<double>();
    Eigen::VectorXd mu = x.colwise().mean().transpose();
    Eigen::VectorXd m2 = (x.rowwise() - mu.transpose()).array().square().colwise().sum().transpose();
    part.mean_.push_back(std::move(mu));
    part.m2_.push_back(std::move(m2));
  }
  merge(part);
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.count_ == 0.0) return;
  if (count_ == 0.0) {
    *this = other;
    return;
  }
  if (other.mean_.size() != mean_.size() || other.mean_[0].size() != mean_[0].size()) {
    throw NormalizationError("cannot merge statistics with different layer counts or dims");
  }
  const double n = count_ + other.count_;
  for (std::size_t l = 0; l < mean_.size(); ++l) {
    const Eigen::VectorXd delta = other.mean_[l] - mean_[l];
    mean_[l] += delta * (other.count_ / n);
    m2_[l] += other.m2_[l] + delta.array().square().matrix() * (count_ * other.count_ / n);
  }
  count_ = n;
}

Eigen::VectorXd MomentAccumulator::stddev(std::size_t layer) const {
  return (m2_[layer] / count_).array().sqrt().max(kStdEpsilon).matrix();
}

std::string NormStats::key_for(const FeatureRecord& record) const {
  return mode == NormMode::speaker ? record.speaker_id : std::string(kGlobalKey);
}

const std::vector<LayerStats>& NormStats::at(const std::string& key) const {
  auto it = per_key.find(key);
  if (it == per_key.end()) {
    throw NormalizationError("no " + to_string(mode) + " normalization statistics for key '" +
                             key + "'");
  }
  return it->second;
}

NormStats compute_norm_stats(std::span<const FeatureRecord* const> records, NormMode mode) {
  if (records.empty()) throw NormalizationError("cannot compute statistics over an empty scope");
  NormStats stats;
  stats.mode = mode;
  std::map<std::string, MomentAccumulator> acc;
  for (const FeatureRecord* r : records) {
    auto& a = acc[stats.key_for(*r)];
    if (a.count() > 0 && a.num_layers() != r->num_layers) {
      throw NormalizationError("record '" + r->utterance_id + "' has a different layer count");
    }
    a.add(*r);
  }
  for (const auto& [key, a] : acc) {
    std::vector<LayerStats> layers;
    for (std::size_t l = 0; l < a.num_layers(); ++l) layers.push_back({a.mean(l), a.stddev(l)});
    stats.per_key.emplace(key, std::move(layers));
  }
  return stats;
}

NormStats compute_norm_stats(const Corpus& corpus, NormMode mode,
                             std::span<const std::size_t> scope, Stream stream) {
  if (scope.empty()) throw NormalizationError("cannot compute statistics over an empty scope");
  std::vector<std::shared_ptr<const FeatureRecord>> owned;
  owned.reserve(scope.size());
  for (std::size_t i : scope) {
    auto r = stream == Stream::primary ? corpus.store->features(i) : corpus.store->aux(i);
    if (!r) {
      throw NormalizationError("utterance '" + corpus.entry(i).utterance_id +
                               "' has no auxiliary stream");
    }
    owned.push_back(std::move(r));
  }
  std::vector<const FeatureRecord*> ptrs;
  for (const auto& r : owned) ptrs.push_back(r.get());
  return compute_norm_stats(ptrs, mode);
}

FeatureRecord apply_normalization(const FeatureRecord& record, const NormStats& stats) {
  const auto& layers = stats.at(stats.key_for(record));
  if (layers.size() != record.num_layers) {
    throw NormalizationError("record '" + record.utterance_id + "' has " +
                             std::to_string(record.num_layers) + " layers, statistics have " +
                             std::to_string(layers.size()));
  }
  FeatureRecord out = record;
  for (std::size_t l = 0; l < record.num_layers; ++l) {
    const auto& s = layers[l];
    if (static_cast<std::size_t>(s.mean.size()) != record.dim) {
      throw NormalizationError("record '" + record.utterance_id + "' has dim " +
                               std::to_string(record.dim) + ", statistics have " +
                               std::to_string(s.mean.size()));
    }
    const Eigen::RowVectorXd mu = s.mean.transpose();
    const Eigen::RowVectorXd inv = s.std.cwiseInverse().transpose();
    const Eigen::MatrixXd z =
        ((record.layer(l).cast<double>().rowwise() - mu).array().rowwise() * inv.array()).matrix();
    out.layer(l) = z.cast<float>();
  }
  return out;
}

}  // namespace serprobe
