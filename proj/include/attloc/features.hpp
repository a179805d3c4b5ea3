#pragma once

#include <cstddef>
#include <vector>

#include "attloc/numerics.hpp"

namespace attloc {

inline constexpr int kSampleRate = 16000;
inline constexpr int kWindowSize = 1024;  // 64 ms
inline constexpr int kHopSize = 512;      // half overlap
inline constexpr int kMelBands = 40;
inline constexpr int kSpectrumBins = kWindowSize / 2 + 1;  // 513
inline constexpr int kChunkSamples = 4 * kSampleRate;      // nominal 4 s
inline constexpr int kMaxChunkSamples = kChunkSamples + kHopSize;

// Mono audio, samples in [-1, 1], fixed 16 kHz rate.
struct AudioChunk {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
};

// A T x 40 matrix of (log-)mel frames; row t is the feature of frame t.
using MelChunk = Matrix;

// Per-mel-bin standardization statistics fitted on a training set.
struct NormStats {
  std::vector<double> mean;  // 40
  std::vector<double> std;   // 40, clamped to >= 1e-6
};

// Number of frames produced for a signal of `samples` length:
// floor((L - 1024) / 512) + 1. L < 1024 is a hard error at framing time.
std::size_t frame_count(std::size_t samples);

// Chop into 1024-sample Hann-windowed frames with hop 512; the trailing
// partial window is dropped. Returns a T x 1024 matrix.
Matrix frame_signal(const AudioChunk& audio);

// 40 unit-peak triangular mel filters over a 513-bin power spectrum,
// HTK mel scale, spanning 0..8000 Hz. Returns a 40 x 513 matrix.
Matrix mel_filterbank();

// Per-frame log mel energies: ln(max(filter_energy, 1e-10)). T x 40.
MelChunk log_mel(const Matrix& windows);

// frame_signal + log_mel.
MelChunk featurize(const AudioChunk& audio);

// Per-bin mean/std (population) over all frames of all chunks. Requires at
// least two chunks; a degenerate bin (std < 1e-6) is clamped with a warning.
NormStats fit_norm(const std::vector<MelChunk>& chunks);
MelChunk apply_norm(const MelChunk& chunk, const NormStats& stats);

}  // namespace attloc
