#include "attloc/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "attloc/errors.hpp"

namespace attloc {

TagLabel parse_tags(const std::string& tags, const std::string& where) {
  TagLabel label;
  for (char ch : tags) {
    const int idx = tag_index(ch);
    if (idx < 0) {
      throw DataError(where + ": unknown tag '" + std::string(1, ch) + "'");
    }
    if (label.bits[idx]) {
      throw DataError(where + ": duplicate tag '" + std::string(1, ch) + "'");
    }
    label.bits[idx] = true;
  }
  return label;
}

// ---------------------------------------------------------------------------
// WAV I/O (RIFF, PCM16 mono 16 kHz only)
// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace

AudioChunk read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();

  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    throw DataError("wav: " + path.string() + " is not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::size_t data_off = 0, data_len = 0;
  std::size_t off = 12;
  while (off + 8 <= n) {
    const std::uint32_t chunk_len = read_u32le(p + off + 4);
    const std::size_t body = off + 8;
    if (body + chunk_len > n) {
      throw DataError("wav: " + path.string() + " truncated chunk");
    }
    if (std::memcmp(p + off, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw DataError("wav: " + path.string() + " fmt chunk too short");
      const std::uint16_t format = read_u16le(p + body);
      const std::uint16_t channels = read_u16le(p + body + 2);
      const std::uint32_t rate = read_u32le(p + body + 4);
      const std::uint16_t bits = read_u16le(p + body + 14);
      if (format != 1) {
        throw DataError("wav: " + path.string() + ": format=" + std::to_string(format) +
                        ", expected 1 (PCM)");
      }
      if (channels != 1) {
        throw DataError("wav: " + path.string() + ": channels=" + std::to_string(channels) +
                        ", expected 1");
      }
      if (rate != static_cast<std::uint32_t>(kSampleRate)) {
        throw DataError("wav: " + path.string() + ": sample_rate=" + std::to_string(rate) +
                        ", expected " + std::to_string(kSampleRate));
      }
      if (bits != 16) {
        throw DataError("wav: " + path.string() + ": bits=" + std::to_string(bits) +
                        ", expected 16");
      }
      have_fmt = true;
    } else if (std::memcmp(p + off, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
    }
    off = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw DataError("wav: " + path.string() + " missing fmt chunk");
  if (data_off == 0) throw DataError("wav: " + path.string() + " missing data chunk");
  if (data_len % 2 != 0) throw DataError("wav: " + path.string() + " odd data length");

  AudioChunk audio;
  audio.sample_rate = kSampleRate;
  audio.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    const std::uint16_t raw = read_u16le(p + data_off + 2 * i);
    audio.samples[i] = static_cast<double>(static_cast<std::int16_t>(raw)) / 32768.0;
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const AudioChunk& audio) {
  const std::uint32_t data_len = static_cast<std::uint32_t>(2 * audio.samples.size());
  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_u32le(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  put_u32le(out, kSampleRate);
  put_u32le(out, kSampleRate * 2);  // byte rate
  put_u16le(out, 2);                // block align
  put_u16le(out, 16);               // bits
  out.append("data");
  put_u32le(out, data_len);
  for (double s : audio.samples) {
    long v = std::lrint(s * 32768.0);
    v = std::clamp(v, -32768L, 32767L);
    put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("wav: cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("wav: write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

Manifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open " + path.string());

  Manifest manifest;
  manifest.dir = path.parent_path();

  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest: " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,tags") {
    throw DataError("manifest: " + path.string() + " bad header '" + line +
                    "', expected 'path,tags'");
  }

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw DataError("manifest: " + path.string() + " row " + std::to_string(row) +
                      ": missing comma");
    }
    ManifestRow entry;
    entry.path = line.substr(0, comma);
    entry.label = parse_tags(line.substr(comma + 1),
                             "manifest: " + path.string() + " row " + std::to_string(row));
    if (entry.path.empty()) {
      throw DataError("manifest: " + path.string() + " row " + std::to_string(row) +
                      ": empty path");
    }
    manifest.rows.push_back(std::move(entry));
  }
  return manifest;
}

std::vector<LabeledChunk> load_dataset(const Manifest& manifest, const NormStats* stats) {
  std::vector<LabeledChunk> out;
  out.reserve(manifest.rows.size());
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const ManifestRow& row = manifest.rows[i];
    std::filesystem::path p(row.path);
    if (p.is_relative()) p = manifest.dir / p;
    try {
      MelChunk mel = featurize(read_wav(p));
      if (stats) mel = apply_norm(mel, *stats);
      out.push_back({std::move(mel), row.label});
    } catch (const DataError& e) {
      throw DataError("manifest row " + std::to_string(i + 2) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

namespace {

constexpr double kNoiseRms = 0.05;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Voss-McCartney pink noise, unit-ish amplitude before scaling.
std::vector<double> pink_noise(Rng& rng, std::size_t n) {
  constexpr int kRows = 16;
  std::array<double, kRows> rows;
  for (double& r : rows) r = rng.uniform(-1.0, 1.0);
  std::vector<double> out(n);
  std::uint64_t counter = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ++counter;
    const int idx = std::min(std::countr_zero(counter), kRows - 1);
    rows[static_cast<std::size_t>(idx)] = rng.uniform(-1.0, 1.0);
    double sum = rng.uniform(-1.0, 1.0);  // white row
    for (double r : rows) sum += r;
    out[i] = sum / (kRows + 1);
  }
  return out;
}

double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

void scale_to_rms(std::vector<double>& x, double target) {
  const double r = rms(x);
  if (r <= 0.0) return;
  const double g = target / r;
  for (double& v : x) v *= g;
}

// Spectrally distinct prototypes, one per tag, each `n` samples long.
std::vector<double> event_waveform(int event, std::size_t n, Rng& rng) {
  std::vector<double> w(n, 0.0);
  const double dt = 1.0 / kSampleRate;
  switch (event) {
    case 0: {  // fixed-frequency tone, 1 kHz
      const double phase = rng.uniform(0.0, kTwoPi);
      for (std::size_t i = 0; i < n; ++i) w[i] = std::sin(kTwoPi * 1000.0 * i * dt + phase);
      break;
    }
    case 1: {  // harmonic stack, f0 = 300 Hz
      std::array<double, 5> phases;
      for (double& p : phases) p = rng.uniform(0.0, kTwoPi);
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 1; k <= 5; ++k) {
          s += std::sin(kTwoPi * 300.0 * k * i * dt + phases[k - 1]) / k;
        }
        w[i] = s;
      }
      break;
    }
    case 2: {  // band-limited noise burst, 2..3 kHz
      constexpr int kPartials = 64;
      std::array<double, kPartials> freqs, phases;
      for (int k = 0; k < kPartials; ++k) {
        freqs[k] = rng.uniform(2000.0, 3000.0);
        phases[k] = rng.uniform(0.0, kTwoPi);
      }
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < kPartials; ++k) s += std::sin(kTwoPi * freqs[k] * i * dt + phases[k]);
        w[i] = s;
      }
      break;
    }
    case 3: {  // chirp, 4.2 -> 5.0 kHz over the event duration
      const double phase = rng.uniform(0.0, kTwoPi);
      const double dur_s = n * dt;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i * dt;
        w[i] = std::sin(kTwoPi * (4200.0 * t + 800.0 * t * t / (2.0 * dur_s)) + phase);
      }
      break;
    }
    case 4: {  // amplitude-modulated tone, 6 kHz carrier, 8 Hz modulation
      const double pc = rng.uniform(0.0, kTwoPi);
      const double pm = rng.uniform(0.0, kTwoPi);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i * dt;
        w[i] = (1.0 + 0.8 * std::sin(kTwoPi * 8.0 * t + pm)) * std::sin(kTwoPi * 6000.0 * t + pc);
      }
      break;
    }
    case 5: {  // click train: 4 ms noise bursts every 60 ms
      const std::size_t period = kSampleRate * 60 / 1000;
      const std::size_t burst = kSampleRate * 4 / 1000;
      for (std::size_t start = 0; start < n; start += period) {
        for (std::size_t i = 0; i < burst && start + i < n; ++i) {
          const double env = std::sin(std::numbers::pi * i / burst);  // soft edges
          w[start + i] = env * rng.uniform(-1.0, 1.0);
        }
      }
      break;
    }
    case 6: {  // low tone, 150 Hz
      const double phase = rng.uniform(0.0, kTwoPi);
      for (std::size_t i = 0; i < n; ++i) w[i] = std::sin(kTwoPi * 150.0 * i * dt + phase);
      break;
    }
    default:
      throw std::invalid_argument("event_waveform: bad event index");
  }

  // 10 ms raised-cosine fades to avoid onset/offset clicks.
  const std::size_t fade = std::min<std::size_t>(kSampleRate / 100, n / 2);
  for (std::size_t i = 0; i < fade; ++i) {
    const double g = 0.5 * (1.0 - std::cos(std::numbers::pi * i / fade));
    w[i] *= g;
    w[n - 1 - i] *= g;
  }
  return w;
}

int div_ceil(int a, int b) { return (a >= 0) ? (a + b - 1) / b : -((-a) / b); }

}  // namespace

std::vector<SynthChunk> synth_corpus(Rng& rng, int n_chunks, double snr_db) {
  if (n_chunks < 1) throw std::invalid_argument("synth_corpus: n_chunks must be >= 1");

  const double event_rms = kNoiseRms * std::pow(10.0, snr_db / 20.0);
  const int total_frames = static_cast<int>(frame_count(kChunkSamples));

  std::vector<SynthChunk> corpus;
  corpus.reserve(static_cast<std::size_t>(n_chunks));
  for (int c = 0; c < n_chunks; ++c) {
    Rng crng = rng.derive(static_cast<std::uint64_t>(c));

    SynthChunk chunk;
    chunk.audio.sample_rate = kSampleRate;
    chunk.audio.samples = pink_noise(crng, kChunkSamples);
    scale_to_rms(chunk.audio.samples, kNoiseRms);

    // 0..3 distinct events.
    const int n_events = static_cast<int>(crng.below(4));
    std::array<int, kNumTags> pool;
    for (int i = 0; i < kNumTags; ++i) pool[i] = i;
    for (int i = 0; i < n_events; ++i) {
      const int j = i + static_cast<int>(crng.below(static_cast<std::size_t>(kNumTags - i)));
      std::swap(pool[i], pool[j]);
    }

    for (int e = 0; e < n_events; ++e) {
      const int event = pool[e];
      const double dur_s = crng.uniform(0.3, 1.5);
      const int dur = static_cast<int>(std::lround(dur_s * kSampleRate));
      const int onset = static_cast<int>(crng.below(static_cast<std::size_t>(kChunkSamples - dur + 1)));

      // Frames whose window center (sample 512t + 512) falls inside the event.
      int start = std::max(0, div_ceil(onset - kHopSize, kHopSize));
      int end = std::min(total_frames, div_ceil(onset + dur - kHopSize, kHopSize));
      if (start >= end) continue;  // unreachable for 0.3 s+ events, kept as a guard

      std::vector<double> w = event_waveform(event, static_cast<std::size_t>(dur), crng);
      scale_to_rms(w, event_rms);
      for (int i = 0; i < dur; ++i) chunk.audio.samples[onset + i] += w[i];

      chunk.label.bits[event] = true;
      chunk.truth.push_back({event, start, end});
    }

    // Keep headroom for PCM16; rescaling the whole chunk preserves SNR.
    double peak = 0.0;
    for (double s : chunk.audio.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.99) {
      const double g = 0.99 / peak;
      for (double& s : chunk.audio.samples) s *= g;
    }

    corpus.push_back(std::move(chunk));
  }
  return corpus;
}

void save_corpus(const std::vector<SynthChunk>& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("synth: cannot create directory " + dir.string());

  std::ofstream manifest(dir / "manifest.csv");
  std::ofstream truth(dir / "truth.csv");
  if (!manifest || !truth) throw DataError("synth: cannot write into " + dir.string());
  manifest << "path,tags\n";
  truth << "path,event,start_frame,end_frame\n";

  char name[32];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::snprintf(name, sizeof(name), "chunk_%05zu.wav", i);
    write_wav(dir / name, corpus[i].audio);
    manifest << name << ',' << corpus[i].label.to_string() << '\n';
    for (const TruthInterval& iv : corpus[i].truth) {
      truth << name << ',' << kTagLetters[static_cast<std::size_t>(iv.event)] << ','
            << iv.start_frame << ',' << iv.end_frame << '\n';
    }
  }
  if (!manifest || !truth) throw DataError("synth: write failed in " + dir.string());
}

}  // namespace attloc
