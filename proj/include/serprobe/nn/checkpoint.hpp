#pragma once

#include <filesystem>
#include <vector>

#include "serprobe/nn/model.hpp"

namespace serprobe::nn {

inline constexpr char kCheckpointMagic[4] = {'S', 'E', 'R', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ParamSet<float> params;
};

// "SERM" | u32 version | u32 header length | JSON header {config, arrays:
// [{name, rows, cols}]} | float32 payload of each array, row-major, in
// header order. All integers little-endian.
std::vector<char> encode_checkpoint(const ModelConfig& config, const ParamSet<float>& params);
Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& origin = "<memory>");

void save_checkpoint(const ModelConfig& config, const ParamSet<float>& params,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace serprobe::nn
