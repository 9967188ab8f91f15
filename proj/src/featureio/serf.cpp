#include "serprobe/featureio/serf.hpp"

#include <cmath>
#include <fstream>

#include "serprobe/detail/bytes.hpp"

namespace serprobe {

namespace detail {

std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(size);
  if (size > 0 && !in.read(bytes.data(), static_cast<std::streamsize>(size))) {
    throw Error("failed reading " + path.string());
  }
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

namespace {

// Parses everything before the payload. The reader is left at the payload.
SerfHeader parse_header(detail::ByteReader& reader) {
  const auto& origin = reader.origin();
  if (!reader.has(4)) throw BadMagicError(origin + ": file too short for SERF magic");
  char magic[4];
  for (char& c : magic) c = reader.get<char>();
  if (std::memcmp(magic, kSerfMagic, 4) != 0) {
    throw BadMagicError(origin + ": bad magic, expected \"SERF\"");
  }
  SerfHeader h;
  try {
    h.version = reader.get<std::uint32_t>();
    if (h.version != kSerfVersion) {
      throw VersionMismatchError(origin + ": unsupported SERF version " +
                                 std::to_string(h.version) + " (expected " +
                                 std::to_string(kSerfVersion) + ")");
    }
    h.utterance_id = reader.get_short_string();
    h.speaker_id = reader.get_short_string();
    h.session_id = reader.get_short_string();
    h.label = reader.get<std::int32_t>();
    h.num_layers = reader.get<std::uint32_t>();
    h.num_frames = reader.get<std::uint32_t>();
    h.dim = reader.get<std::uint32_t>();
  } catch (const VersionMismatchError&) {
    throw;
  } catch (const Error&) {
    throw TruncatedFileError(origin + ": truncated SERF header", 0, reader.position());
  }
  h.payload_bytes = std::uint64_t{h.num_layers} * h.num_frames * h.dim * sizeof(float);
  return h;
}

}  // namespace

FeatureRecord make_record(std::string utterance_id, std::string speaker_id,
                          std::string session_id, int label, std::uint32_t num_layers,
                          std::uint32_t num_frames, std::uint32_t dim) {
  FeatureRecord r;
  r.utterance_id = std::move(utterance_id);
  r.speaker_id = std::move(speaker_id);
  r.session_id = std::move(session_id);
  r.label = label;
  r.num_layers = num_layers;
  r.num_frames = num_frames;
  r.dim = dim;
  r.data.assign(std::size_t{num_layers} * num_frames * dim, 0.0f);
  return r;
}

void validate(const FeatureRecord& record) {
  if (record.num_layers < 1 || record.num_frames < 1 || record.dim < 1) {
    throw FeatureFormatError("record '" + record.utterance_id + "': L, T and D must all be >= 1");
  }
  const std::size_t expected = std::size_t{record.num_layers} * record.num_frames * record.dim;
  if (record.data.size() != expected) {
    throw FeatureFormatError("record '" + record.utterance_id + "': payload has " +
                             std::to_string(record.data.size()) + " values, shape implies " +
                             std::to_string(expected));
  }
  for (std::size_t i = 0; i < record.data.size(); ++i) {
    if (!std::isfinite(record.data[i])) {
      throw NonFiniteValueError("record '" + record.utterance_id +
                                "': non-finite value at flat index " + std::to_string(i));
    }
  }
  if (record.label < -1) {
    throw FeatureFormatError("record '" + record.utterance_id + "': label must be >= -1");
  }
}

std::vector<char> encode_serf(const FeatureRecord& record) {
  validate(record);
  detail::ByteWriter w;
  w.put_raw(kSerfMagic, 4);
  w.put<std::uint32_t>(kSerfVersion);
  w.put_short_string(record.utterance_id);
  w.put_short_string(record.speaker_id);
  w.put_short_string(record.session_id);
  w.put<std::int32_t>(record.label);
  w.put<std::uint32_t>(record.num_layers);
  w.put<std::uint32_t>(record.num_frames);
  w.put<std::uint32_t>(record.dim);
  w.put_floats(record.data.data(), record.data.size());
  return std::move(w.bytes());
}

FeatureRecord decode_serf(const std::vector<char>& bytes, const std::string& origin) {
  detail::ByteReader reader(bytes, origin);
  const SerfHeader h = parse_header(reader);
  const std::uint64_t header_bytes = reader.position();
  if (reader.remaining() < h.payload_bytes) {
    throw TruncatedFileError(origin + ": truncated payload, expected " +
                                 std::to_string(h.payload_bytes) + " payload bytes, found " +
                                 std::to_string(reader.remaining()),
                             h.payload_bytes + header_bytes, bytes.size());
  }
  if (reader.remaining() > h.payload_bytes) {
    throw FeatureFormatError(origin + ": " + std::to_string(reader.remaining() - h.payload_bytes) +
                             " trailing bytes after payload");
  }
  FeatureRecord r;
  r.utterance_id = h.utterance_id;
  r.speaker_id = h.speaker_id;
  r.session_id = h.session_id;
  r.label = h.label;
  r.num_layers = h.num_layers;
  r.num_frames = h.num_frames;
  r.dim = h.dim;
  r.data.resize(h.payload_bytes / sizeof(float));
  reader.get_floats(r.data.data(), r.data.size());
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    if (std::isnan(r.data[i])) {
      throw NonFiniteValueError(origin + ": NaN in payload at flat index " + std::to_string(i));
    }
  }
  validate(r);
  return r;
}

void write_feature_file(const FeatureRecord& record, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_serf(record));
}

FeatureRecord read_feature_file(const std::filesystem::path& path) {
  return decode_serf(detail::read_file_bytes(path), path.string());
}

SerfHeader read_feature_header(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader reader(bytes, path.string());
  return parse_header(reader);
}

}  // namespace serprobe
