#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attloc/features.hpp"
#include "attloc/numerics.hpp"
#include "attloc/tags.hpp"

namespace attloc {

struct ManifestRow {
  std::string path;  // relative paths resolve against the manifest directory
  TagLabel label;
};

struct Manifest {
  std::filesystem::path dir;  // directory of the manifest file
  std::vector<ManifestRow> rows;
};

// Frame-level ground truth for one synthetic event occurrence.
// Frames [start_frame, end_frame) in the fixed 1024/512 framing.
struct TruthInterval {
  int event = 0;  // tag index
  int start_frame = 0;
  int end_frame = 0;
};

// Synthetic chunk: audio plus chunk-level label for training, plus hidden
// frame-level intervals used only to evaluate localization.
struct SynthChunk {
  AudioChunk audio;
  TagLabel label;
  std::vector<TruthInterval> truth;
};

// A featurized training example.
struct LabeledChunk {
  MelChunk mel;
  TagLabel label;
};

// Parse a tag string like "cp" (subset of "bcfmopv"). Unknown or duplicate
// letters are errors; `where` is prepended to the message.
TagLabel parse_tags(const std::string& tags, const std::string& where);

// RIFF/WAVE reader restricted to PCM16 mono 16 kHz; samples scaled by 1/32768.
AudioChunk read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioChunk& audio);

// CSV with header `path,tags`. Errors carry the offending row number.
Manifest parse_manifest(const std::filesystem::path& path);

// Read + featurize every manifest row, standardizing when stats are given.
std::vector<LabeledChunk> load_dataset(const Manifest& manifest,
                                       const NormStats* stats = nullptr);

// 4-second scenes: pink-noise background at -snr_db relative to the events,
// plus 0..3 events drawn without replacement from the seven prototypes with
// uniform onsets and 0.3..1.5 s durations.
std::vector<SynthChunk> synth_corpus(Rng& rng, int n_chunks, double snr_db);

// Write WAVs, manifest.csv (`path,tags`) and truth.csv
// (`path,event,start_frame,end_frame`) under `dir`.
void save_corpus(const std::vector<SynthChunk>& corpus, const std::filesystem::path& dir);

}  // namespace attloc
