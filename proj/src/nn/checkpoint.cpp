#include "serprobe/nn/checkpoint.hpp"

#include <cstring>

#include "serprobe/detail/bytes.hpp"

namespace serprobe::nn {

using nlohmann::json;

std::vector<char> encode_checkpoint(const ModelConfig& config, const ParamSet<float>& params) {
  json header;
  header["config"] = to_json(config);
  header["arrays"] = json::array();
  for (const auto& [name, m] : params) {
    header["arrays"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  }
  const std::string text = header.dump();
  serprobe::detail::ByteWriter w;
  w.put_raw(kCheckpointMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.put_raw(text.data(), text.size());
  for (const auto& [name, m] : params) {
    const FrameMatrix<float> row_major = m;
    w.put_floats(row_major.data(), static_cast<std::size_t>(row_major.size()));
  }
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& origin) {
  serprobe::detail::ByteReader r(bytes, origin);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw Error(origin + ": not a model checkpoint (bad magic)");
  }
  for (int i = 0; i < 4; ++i) r.get<char>();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = r.get<std::uint32_t>();
  if (!r.has(len)) throw Error(origin + ": truncated checkpoint header");
  std::string text(len, '\0');
  for (auto& c : text) c = r.get<char>();
  Checkpoint ck;
  json header;
  try {
    header = json::parse(text);
    ck.config = model_config_from_json(header.at("config"));
  } catch (const json::exception& e) {
    throw Error(origin + ": malformed checkpoint header: " + e.what());
  }
  for (const auto& a : header.at("arrays")) {
    const auto rows = a.at("rows").get<Eigen::Index>();
    const auto cols = a.at("cols").get<Eigen::Index>();
    FrameMatrix<float> m(rows, cols);
    r.get_floats(m.data(), static_cast<std::size_t>(m.size()));
    ck.params.set(a.at("name").get<std::string>(), Matrix<float>(m));
  }
  if (r.remaining() != 0) throw Error(origin + ": trailing bytes after checkpoint payload");
  return ck;
}

void save_checkpoint(const ModelConfig& config, const ParamSet<float>& params,
                     const std::filesystem::path& path) {
  serprobe::detail::write_file_bytes(path, encode_checkpoint(config, params));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(serprobe::detail::read_file_bytes(path), path.string());
}

}  // namespace serprobe::nn
