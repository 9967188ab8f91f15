#include <cmath>
#include <cstring>

#include "serprobe/detail/bytes.hpp"
#include "serprobe/dsp/spectrogram.hpp"

namespace serprobe {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader in(bytes, path.string());
  const std::string where = path.string() + ": ";
  auto tag = [&] {
    char t[4];
    for (char& c : t) c = in.get<char>();
    return std::string(t, 4);
  };
  try {
    if (tag() != "RIFF") throw AudioError(where + "not a RIFF file");
    in.get<std::uint32_t>();
    if (tag() != "WAVE") throw AudioError(where + "not a WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    while (in.has(8)) {
      const std::string id = tag();
      const auto size = in.get<std::uint32_t>();
      if (id == "fmt ") {
        if (size < 16) throw AudioError(where + "fmt chunk too small");
        format = in.get<std::uint16_t>();
        channels = in.get<std::uint16_t>();
        rate = in.get<std::uint32_t>();
        in.get<std::uint32_t>();  // byte rate
        in.get<std::uint16_t>();  // block align
        bits = in.get<std::uint16_t>();
        std::size_t consumed = 16;
        if (format == kFormatExtensible && size >= 26) {
          in.get<std::uint16_t>();  // cb size
          in.get<std::uint16_t>();  // valid bits
          in.get<std::uint32_t>();  // channel mask
          format = in.get<std::uint16_t>();
          consumed = 26;
        }
        for (std::size_t i = consumed; i < size + (size & 1); ++i) in.get<char>();
        have_fmt = true;
      } else if (id == "data") {
        if (!have_fmt) throw AudioError(where + "data chunk before fmt chunk");
        if (channels == 0) throw AudioError(where + "zero channels");
        const bool pcm16 = format == kFormatPcm && bits == 16;
        const bool f32 = format == kFormatFloat && bits == 32;
        if (!pcm16 && !f32) {
          throw AudioError(where + "unsupported encoding (format " + std::to_string(format) +
                           ", " + std::to_string(bits) + " bits); need 16-bit PCM or 32-bit float");
        }
        const std::size_t frame_bytes = std::size_t{channels} * bits / 8;
        const std::size_t available = std::min<std::size_t>(size, in.remaining());
        const std::size_t frames = available / frame_bytes;
        Waveform w;
        w.sample_rate = static_cast<int>(rate);
        w.samples.resize(frames);
        for (std::size_t f = 0; f < frames; ++f) {
          double sum = 0.0;
          for (std::uint16_t c = 0; c < channels; ++c) {
            sum += pcm16 ? in.get<std::int16_t>() / 32768.0 : static_cast<double>(in.get<float>());
          }
          w.samples[f] = static_cast<float>(sum / channels);
        }
        if (w.sample_rate <= 0) throw AudioError(where + "sample rate must be positive");
        for (float s : w.samples) {
          if (!std::isfinite(s)) throw AudioError(where + "non-finite sample");
        }
        return w;
      } else {
        for (std::size_t i = 0; i < size + (size & 1) && in.has(1); ++i) in.get<char>();
      }
    }
  } catch (const AudioError&) {
    throw;
  } catch (const Error& e) {
    throw AudioError(where + "malformed WAV (" + e.what() + ")");
  }
  throw AudioError(where + "no data chunk");
}

void write_wav_pcm16(const Waveform& wave, const std::filesystem::path& path) {
  detail::ByteWriter w;
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  w.put_raw("RIFF", 4);
  w.put<std::uint32_t>(36 + data_bytes);
  w.put_raw("WAVE", 4);
  w.put_raw("fmt ", 4);
  w.put<std::uint32_t>(16);
  w.put<std::uint16_t>(kFormatPcm);
  w.put<std::uint16_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(wave.sample_rate));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(wave.sample_rate) * 2);
  w.put<std::uint16_t>(2);
  w.put<std::uint16_t>(16);
  w.put_raw("data", 4);
  w.put<std::uint32_t>(data_bytes);
  for (float s : wave.samples) {
    const double scaled = std::clamp(static_cast<double>(s), -1.0, 1.0) * 32767.0;
    w.put<std::int16_t>(static_cast<std::int16_t>(std::lround(scaled)));
  }
  detail::write_file_bytes(path, w.bytes());
}

}  // namespace serprobe
