#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "serprobe/types.hpp"

namespace serprobe {

// One utterance worth of features: L streams (layers) of T frames by D dims.
//
// Payload is stored layer-major then frame-major, so layer l, frame t,
// dimension j lives at data[(l * T + t) * D + j]. Single-stream features
// (spectrogram, eGeMAPS, one encoder output) have L == 1; a full wav2vec2
// stack has L == 13 with index 0 the local encoder output.
struct FeatureRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string session_id;
  int label = -1;  // -1 is unlabeled
  std::uint32_t num_layers = 0;
  std::uint32_t num_frames = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  using LayerMap = Eigen::Map<FrameMatrix<float>>;
  using ConstLayerMap = Eigen::Map<const FrameMatrix<float>>;

  std::size_t layer_size() const { return std::size_t{num_frames} * dim; }

  LayerMap layer(std::size_t l) {
    return LayerMap(data.data() + l * layer_size(), num_frames, dim);
  }
  ConstLayerMap layer(std::size_t l) const {
    return ConstLayerMap(data.data() + l * layer_size(), num_frames, dim);
  }

  float at(std::size_t l, std::size_t t, std::size_t j) const {
    return data[(l * num_frames + t) * dim + j];
  }

  bool operator==(const FeatureRecord&) const = default;
};

// Builds a zero-filled record with the given shape.
FeatureRecord make_record(std::string utterance_id, std::string speaker_id,
                          std::string session_id, int label, std::uint32_t num_layers,
                          std::uint32_t num_frames, std::uint32_t dim);

// Throws FeatureFormatError if shape fields and payload disagree or a value is
// not finite.
void validate(const FeatureRecord& record);

class FeatureFormatError : public Error {
 public:
  using Error::Error;
};
class BadMagicError : public FeatureFormatError {
 public:
  using FeatureFormatError::FeatureFormatError;
};
class VersionMismatchError : public FeatureFormatError {
 public:
  using FeatureFormatError::FeatureFormatError;
};
class TruncatedFileError : public FeatureFormatError {
 public:
  TruncatedFileError(const std::string& what, std::uint64_t expected, std::uint64_t actual)
      : FeatureFormatError(what), expected_bytes(expected), actual_bytes(actual) {}
  std::uint64_t expected_bytes;
  std::uint64_t actual_bytes;
};
class NonFiniteValueError : public FeatureFormatError {
 public:
  using FeatureFormatError::FeatureFormatError;
};

inline constexpr char kSerfMagic[4] = {'S', 'E', 'R', 'F'};
inline constexpr std::uint32_t kSerfVersion = 1;

// SERF layout, little-endian:
//   "SERF" | u32 version | u16+utf8 utterance_id | u16+utf8 speaker_id |
//   u16+utf8 session_id | i32 label | u32 L | u32 T | u32 D | f32[L*T*D]
std::vector<char> encode_serf(const FeatureRecord& record);
FeatureRecord decode_serf(const std::vector<char>& bytes, const std::string& origin = "<memory>");

void write_feature_file(const FeatureRecord& record, const std::filesystem::path& path);
FeatureRecord read_feature_file(const std::filesystem::path& path);

// Header fields only; the payload is not read.
struct SerfHeader {
  std::uint32_t version = 0;
  std::string utterance_id;
  std::string speaker_id;
  std::string session_id;
  int label = -1;
  std::uint32_t num_layers = 0;
  std::uint32_t num_frames = 0;
  std::uint32_t dim = 0;
  std::uint64_t payload_bytes = 0;
};
SerfHeader read_feature_header(const std::filesystem::path& path);

}  // namespace serprobe
