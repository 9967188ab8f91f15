#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "serprobe/types.hpp"

// Little-endian byte packing shared by the feature and checkpoint containers.
namespace serprobe::detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }

  void put_raw(const void* data, std::size_t size) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }

  // u16 length prefix then UTF-8 bytes.
  void put_short_string(const std::string& s) {
    if (s.size() > 0xFFFF) throw Error("string field longer than 65535 bytes");
    put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    put_raw(s.data(), s.size());
  }

  void put_floats(const float* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
      put_raw(data, count * sizeof(float));
    } else {
      for (std::size_t i = 0; i < count; ++i) put(data[i]);
    }
  }

  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }
  const std::string& origin() const { return origin_; }

  bool has(std::size_t n) const { return remaining() >= n; }

  template <typename T>
  T get() {
    require(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string get_short_string() {
    const auto n = get<std::uint16_t>();
    require(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void get_floats(float* out, std::size_t count) {
    require(count * sizeof(float));
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out, bytes_.data() + pos_, count * sizeof(float));
      pos_ += count * sizeof(float);
    } else {
      for (std::size_t i = 0; i < count; ++i) out[i] = get<float>();
    }
  }

 private:
  void require(std::size_t n) const {
    if (!has(n)) {
      throw Error(origin_ + ": unexpected end of data at offset " + std::to_string(pos_));
    }
  }

  const std::vector<char>& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file_bytes(const std::filesystem::path& path);

// Writes to a sibling temporary file then renames over the destination.
void write_file_bytes(const std::filesystem::path& path, const std::vector<char>& bytes);

}  // namespace serprobe::detail
