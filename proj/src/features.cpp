#include "attloc/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

#include "attloc/errors.hpp"

namespace attloc {

namespace {

constexpr double kLogFloor = 1e-10;

void validate_audio(const AudioChunk& audio) {
  if (audio.sample_rate != kSampleRate) {
    throw DataError("audio: sample_rate=" + std::to_string(audio.sample_rate) +
                    ", expected " + std::to_string(kSampleRate));
  }
  if (audio.samples.empty()) {
    throw DataError("audio: empty signal");
  }
  if (audio.samples.size() > static_cast<std::size_t>(kMaxChunkSamples)) {
    throw DataError("audio: " + std::to_string(audio.samples.size()) + " samples exceeds max " +
                    std::to_string(kMaxChunkSamples));
  }
}

// Iterative radix-2 FFT, in place. n must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

std::size_t frame_count(std::size_t samples) {
  if (samples < static_cast<std::size_t>(kWindowSize)) {
    throw DataError("audio: " + std::to_string(samples) + " samples, shorter than one " +
                    std::to_string(kWindowSize) + "-sample window");
  }
  return (samples - kWindowSize) / kHopSize + 1;
}

Matrix frame_signal(const AudioChunk& audio) {
  validate_audio(audio);
  const std::size_t frames = frame_count(audio.samples.size());

  // Periodic Hann window: 0.5 * (1 - cos(2*pi*n / N)).
  std::vector<double> window(kWindowSize);
  for (int n = 0; n < kWindowSize; ++n) {
    window[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / kWindowSize));
  }

  Matrix out(frames, kWindowSize);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = audio.samples.data() + t * kHopSize;
    double* dst = out.row(t);
    for (int n = 0; n < kWindowSize; ++n) dst[n] = src[n] * window[n];
  }
  return out;
}

Matrix mel_filterbank() {
  const double mel_max = hz_to_mel(kSampleRate / 2.0);
  // 42 equally spaced mel points: edges 0 and 8000, 40 centers between.
  std::vector<double> hz(kMelBands + 2);
  for (int i = 0; i < kMelBands + 2; ++i) {
    hz[i] = mel_to_hz(mel_max * i / (kMelBands + 1));
  }

  Matrix fb(kMelBands, kSpectrumBins);
  for (int m = 0; m < kMelBands; ++m) {
    const double lo = hz[m], center = hz[m + 1], hi = hz[m + 2];
    for (int k = 0; k < kSpectrumBins; ++k) {
      const double f = static_cast<double>(k) * kSampleRate / kWindowSize;
      double w = 0.0;
      if (f > lo && f < hi) {
        w = (f <= center) ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
      }
      fb(m, k) = w;
    }
  }
  return fb;
}

MelChunk log_mel(const Matrix& windows) {
  if (windows.cols() != static_cast<std::size_t>(kWindowSize)) {
    throw std::invalid_argument("log_mel: expected " + std::to_string(kWindowSize) +
                                "-sample frames, got " + std::to_string(windows.cols()));
  }
  static const Matrix fb = mel_filterbank();

  MelChunk out(windows.rows(), kMelBands);
  std::vector<std::complex<double>> buf(kWindowSize);
  std::vector<double> power(kSpectrumBins);
  for (std::size_t t = 0; t < windows.rows(); ++t) {
    const double* frame = windows.row(t);
    for (int n = 0; n < kWindowSize; ++n) buf[n] = {frame[n], 0.0};
    fft_inplace(buf);
    for (int k = 0; k < kSpectrumBins; ++k) power[k] = std::norm(buf[k]);

    double* mel = out.row(t);
    for (int m = 0; m < kMelBands; ++m) {
      const double* fr = fb.row(m);
      double acc = 0.0;
      for (int k = 0; k < kSpectrumBins; ++k) acc += fr[k] * power[k];
      mel[m] = std::log(std::max(acc, kLogFloor));
    }
  }
  return out;
}

MelChunk featurize(const AudioChunk& audio) { return log_mel(frame_signal(audio)); }

NormStats fit_norm(const std::vector<MelChunk>& chunks) {
  if (chunks.size() < 2) {
    throw DataError("fit_norm: need at least 2 chunks, got " + std::to_string(chunks.size()));
  }
  NormStats stats;
  stats.mean.assign(kMelBands, 0.0);
  stats.std.assign(kMelBands, 0.0);

  std::size_t frames = 0;
  for (const MelChunk& c : chunks) {
    if (c.cols() != static_cast<std::size_t>(kMelBands)) {
      throw std::invalid_argument("fit_norm: chunk has " + std::to_string(c.cols()) + " columns");
    }
    frames += c.rows();
    for (std::size_t t = 0; t < c.rows(); ++t) {
      const double* row = c.row(t);
      for (int m = 0; m < kMelBands; ++m) stats.mean[m] += row[m];
    }
  }
  for (int m = 0; m < kMelBands; ++m) stats.mean[m] /= static_cast<double>(frames);

  for (const MelChunk& c : chunks) {
    for (std::size_t t = 0; t < c.rows(); ++t) {
      const double* row = c.row(t);
      for (int m = 0; m < kMelBands; ++m) {
        const double d = row[m] - stats.mean[m];
        stats.std[m] += d * d;
      }
    }
  }
  for (int m = 0; m < kMelBands; ++m) {
    stats.std[m] = std::sqrt(stats.std[m] / static_cast<double>(frames));
    if (stats.std[m] < 1e-6) {
      std::fprintf(stderr, "warning: mel bin %d has degenerate std %.3g, clamping to 1e-6\n", m,
                   stats.std[m]);
      stats.std[m] = 1e-6;
    }
  }
  return stats;
}

MelChunk apply_norm(const MelChunk& chunk, const NormStats& stats) {
  if (chunk.cols() != static_cast<std::size_t>(kMelBands) ||
      stats.mean.size() != static_cast<std::size_t>(kMelBands) ||
      stats.std.size() != static_cast<std::size_t>(kMelBands)) {
    throw std::invalid_argument("apply_norm: shape mismatch");
  }
  MelChunk out = chunk;
  for (std::size_t t = 0; t < out.rows(); ++t) {
    double* row = out.row(t);
    for (int m = 0; m < kMelBands; ++m) row[m] = (row[m] - stats.mean[m]) / stats.std[m];
  }
  return out;
}

}  // namespace attloc
