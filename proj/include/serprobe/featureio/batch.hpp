#pragma once

#include <span>
#include <vector>

#include "serprobe/featureio/serf.hpp"

namespace serprobe {

// Zero-padded minibatch. features is [B][L][Tmax][D], mask is B x Tmax with
// 1 for valid frames. Padded feature positions are exactly 0.
struct Batch {
  std::size_t size = 0;
  std::size_t num_layers = 0;
  std::size_t max_frames = 0;
  std::size_t dim = 0;
  std::vector<float> features;
  Eigen::MatrixXf mask;
  std::vector<int> labels;

  // Fusion auxiliary stream, [B][Tmax][D_aux], sharing the primary mask.
  std::size_t aux_dim = 0;
  std::vector<float> aux_features;
  Eigen::MatrixXf aux_mask;

  bool has_aux() const { return aux_dim > 0; }

  using ConstFrames = Eigen::Map<const FrameMatrix<float>>;

  ConstFrames layer(std::size_t b, std::size_t l) const {
    return ConstFrames(features.data() + (b * num_layers + l) * max_frames * dim, max_frames, dim);
  }
  ConstFrames aux(std::size_t b) const {
    return ConstFrames(aux_features.data() + b * max_frames * aux_dim, max_frames, aux_dim);
  }
  std::size_t length(std::size_t b) const {
    return static_cast<std::size_t>(mask.row(b).sum() + 0.5f);
  }
};

class BatchError : public Error {
 public:
  using Error::Error;
};

// Keeps the first min(T, max_frames) frames of each record.
Batch assemble_batch(std::span<const FeatureRecord* const> records, std::size_t max_frames);
Batch assemble_batch(std::span<const FeatureRecord> records, std::size_t max_frames);

// Adds the Fusion stream. Aux records must be single-layer. When an aux
// sequence and its primary sequence differ in length both are cut to the
// shorter one; returns how many utterances were cut.
std::size_t attach_aux(Batch& batch, std::span<const FeatureRecord* const> aux,
                       std::size_t max_frames);

}  // namespace serprobe
