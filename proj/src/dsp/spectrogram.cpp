#include "serprobe/dsp/spectrogram.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace serprobe {

FrameGeometry frame_geometry(int sample_rate, const SpectrogramConfig& cfg) {
  if (sample_rate <= 0) throw AudioError("sample rate must be positive");
  if (cfg.window_ms <= 0.0 || cfg.hop_ms <= 0.0) throw AudioError("window and hop must be positive");
  FrameGeometry g;
  g.window = static_cast<std::size_t>(std::lround(cfg.window_ms * sample_rate / 1000.0));
  g.hop = static_cast<std::size_t>(std::lround(cfg.hop_ms * sample_rate / 1000.0));
  if (g.window == 0 || g.hop == 0) throw AudioError("window or hop rounds to zero samples");
  g.nfft = 1;
  while (g.nfft < g.window) g.nfft <<= 1;
  return g;
}

Eigen::VectorXd hann_window(std::size_t length) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(length));
  for (std::size_t n = 0; n < length; ++n) {
    w[static_cast<Eigen::Index>(n)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(length));
  }
  return w;
}

FrameMatrix<float> magnitude_spectrogram(const Waveform& wave, const SpectrogramConfig& cfg) {
  const FrameGeometry g = frame_geometry(wave.sample_rate, cfg);
  const std::size_t T = g.frames(wave.samples.size());
  if (T == 0) {
    throw AudioError("audio has " + std::to_string(wave.samples.size()) +
                     " samples, shorter than one " + std::to_string(g.window) + "-sample window");
  }
  const Eigen::VectorXd window = hann_window(g.window);
  FrameMatrix<float> out(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(g.bins()));

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(g.nfft, 0.0);
  std::vector<std::complex<double>> spectrum;
  for (std::size_t t = 0; t < T; ++t) {
    const float* src = wave.samples.data() + t * g.hop;
    for (std::size_t n = 0; n < g.window; ++n) frame[n] = src[n] * window[static_cast<Eigen::Index>(n)];
    std::fill(frame.begin() + static_cast<std::ptrdiff_t>(g.window), frame.end(), 0.0);
    fft.fwd(spectrum, frame);
    for (std::size_t k = 0; k < g.bins(); ++k) {
      out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = static_cast<float>(std::abs(spectrum[k]));
    }
  }
  return out;
}

Waveform trim_waveform(const Waveform& wave, double max_seconds) {
  if (max_seconds <= 0.0) throw AudioError("max_seconds must be positive");
  const auto limit = static_cast<std::size_t>(std::floor(max_seconds * wave.sample_rate));
  Waveform out;
  out.sample_rate = wave.sample_rate;
  const std::size_t keep = std::min(limit, wave.samples.size());
  out.samples.assign(wave.samples.begin(), wave.samples.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

}  // namespace serprobe
