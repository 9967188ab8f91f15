#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "serprobe/types.hpp"

namespace serprobe {

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

class AudioError : public Error {
 public:
  using Error::Error;
};

// PCM WAV reader: 16-bit integer or 32-bit float, any channel count (averaged
// to mono). Integer samples are scaled to [-1, 1).
Waveform read_wav(const std::filesystem::path& path);
void write_wav_pcm16(const Waveform& wave, const std::filesystem::path& path);

struct SpectrogramConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
};

// Analysis geometry derived from a sample rate.
struct FrameGeometry {
  std::size_t window = 0;  // round(window_ms * sr / 1000)
  std::size_t hop = 0;     // round(hop_ms * sr / 1000)
  std::size_t nfft = 0;    // smallest power of two >= window
  std::size_t bins() const { return nfft / 2 + 1; }
  // 1 + floor((N - window) / hop); 0 when N < window.
  std::size_t frames(std::size_t num_samples) const {
    return num_samples < window ? 0 : 1 + (num_samples - window) / hop;
  }
};

FrameGeometry frame_geometry(int sample_rate, const SpectrogramConfig& cfg = {});

// Periodic Hann window: w[n] = 0.5 - 0.5 cos(2 pi n / N).
Eigen::VectorXd hann_window(std::size_t length);

// |DFT| of each Hann-windowed, zero-padded frame over the first nfft/2+1 bins.
// Result is T x (nfft/2+1), one frame per row. No log or mel warping.
FrameMatrix<float> magnitude_spectrogram(const Waveform& wave, const SpectrogramConfig& cfg = {});

// out[t] = (in[2t] + in[2t+1]) / 2; a trailing odd frame is dropped.
template <typename Derived>
FrameMatrix<typename Derived::Scalar> downsample_avg2(const Eigen::MatrixBase<Derived>& seq) {
  using S = typename Derived::Scalar;
  if (seq.rows() < 2) throw Error("downsample_avg2 needs at least 2 frames");
  const Eigen::Index half = seq.rows() / 2;
  FrameMatrix<S> out(half, seq.cols());
  for (Eigen::Index t = 0; t < half; ++t) {
    out.row(t) = (seq.row(2 * t) + seq.row(2 * t + 1)) / S(2);
  }
  return out;
}

// Keeps the first min(len, max_seconds * sr) samples.
Waveform trim_waveform(const Waveform& wave, double max_seconds = 15.0);

}  // namespace serprobe
