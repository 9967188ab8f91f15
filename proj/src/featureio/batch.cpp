#include "serprobe/featureio/batch.hpp"

#include <algorithm>

namespace serprobe {

Batch assemble_batch(std::span<const FeatureRecord* const> records, std::size_t max_frames) {
  if (records.empty()) throw BatchError("cannot assemble an empty batch");
  if (max_frames < 1) throw BatchError("max_frames must be >= 1");
  Batch batch;
  batch.size = records.size();
  batch.num_layers = records[0]->num_layers;
  batch.dim = records[0]->dim;
  for (const FeatureRecord* r : records) {
    if (r->num_layers != batch.num_layers || r->dim != batch.dim) {
      throw BatchError("record '" + r->utterance_id + "' has shape L=" +
                       std::to_string(r->num_layers) + " D=" + std::to_string(r->dim) +
                       ", batch expects L=" + std::to_string(batch.num_layers) +
                       " D=" + std::to_string(batch.dim));
    }
    batch.max_frames = std::max<std::size_t>(batch.max_frames, std::min<std::size_t>(r->num_frames, max_frames));
  }
  const std::size_t L = batch.num_layers, Tmax = batch.max_frames, D = batch.dim;
  batch.features.assign(batch.size * L * Tmax * D, 0.0f);
  batch.mask = Eigen::MatrixXf::Zero(static_cast<Eigen::Index>(batch.size), static_cast<Eigen::Index>(Tmax));
  batch.labels.reserve(batch.size);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const FeatureRecord& r = *records[b];
    const std::size_t keep = std::min<std::size_t>(r.num_frames, max_frames);
    for (std::size_t l = 0; l < L; ++l) {
      const float* src = r.data.data() + l * r.layer_size();
      float* dst = batch.features.data() + (b * L + l) * Tmax * D;
      std::copy(src, src + keep * D, dst);
    }
    batch.mask.row(static_cast<Eigen::Index>(b)).head(static_cast<Eigen::Index>(keep)).setOnes();
    batch.labels.push_back(r.label);
  }
  return batch;
}

Batch assemble_batch(std::span<const FeatureRecord> records, std::size_t max_frames) {
  std::vector<const FeatureRecord*> ptrs;
  ptrs.reserve(records.size());
  for (const auto& r : records) ptrs.push_back(&r);
  return assemble_batch(std::span<const FeatureRecord* const>(ptrs), max_frames);
}

std::size_t attach_aux(Batch& batch, std::span<const FeatureRecord* const> aux,
                       std::size_t max_frames) {
  if (aux.size() != batch.size) {
    throw BatchError("aux stream has " + std::to_string(aux.size()) + " records, batch has " +
                     std::to_string(batch.size));
  }
  const std::size_t D = aux[0]->dim;
  for (const FeatureRecord* r : aux) {
    if (r->num_layers != 1) {
      throw BatchError("aux record '" + r->utterance_id + "' must have exactly one layer");
    }
    if (r->dim != D) throw BatchError("aux record '" + r->utterance_id + "' has inconsistent dim");
  }
  const std::size_t Tmax = batch.max_frames;
  batch.aux_dim = D;
  batch.aux_features.assign(batch.size * Tmax * D, 0.0f);
  std::size_t cut = 0;
  for (std::size_t b = 0; b < batch.size; ++b) {
    const std::size_t main_len = batch.length(b);
    const std::size_t aux_len = std::min<std::size_t>(aux[b]->num_frames, max_frames);
    const std::size_t keep = std::min(main_len, aux_len);
    if (keep != main_len || keep != aux_len) ++cut;
    const float* src = aux[b]->data.data();
    std::copy(src, src + keep * D, batch.aux_features.data() + b * Tmax * D);
    for (std::size_t t = keep; t < main_len; ++t) {
      batch.mask(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(t)) = 0.0f;
      for (std::size_t l = 0; l < batch.num_layers; ++l) {
        float* row = batch.features.data() + ((b * batch.num_layers + l) * Tmax + t) * batch.dim;
        std::fill(row, row + batch.dim, 0.0f);
      }
    }
  }
  batch.aux_mask = batch.mask;
  return cut;
}

}  // namespace serprobe
