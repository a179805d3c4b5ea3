#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>

#include "attloc/data.hpp"
#include "attloc/errors.hpp"

using namespace attloc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("attloc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Minimal WAV with arbitrary fmt fields, for format-error tests.
std::string raw_wav(std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                    const std::vector<std::int16_t>& samples) {
  std::string s;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  auto u16 = [&](std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xFF));
    s.push_back(static_cast<char>((v >> 8) & 0xFF));
  };
  const std::uint32_t data_len = static_cast<std::uint32_t>(2 * samples.size());
  s += "RIFF";
  u32(36 + data_len);
  s += "WAVEfmt ";
  u32(16);
  u16(1);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  s += "data";
  u32(data_len);
  for (std::int16_t v : samples) u16(static_cast<std::uint16_t>(v));
  return s;
}

}  // namespace

TEST_CASE("tag parsing") {
  CHECK(parse_tags("cp", "t").bits == std::array<bool, 7>{false, true, false, false, false, true, false});
  CHECK(parse_tags("", "t") == TagLabel{});
  CHECK(parse_tags("bcfmopv", "t").to_string() == "bcfmopv");
  CHECK_THROWS_WITH_AS(parse_tags("cz", "row 3"), doctest::Contains("unknown tag 'z'"), DataError);
  CHECK_THROWS_WITH_AS(parse_tags("cc", "row 3"), doctest::Contains("duplicate tag 'c'"), DataError);
}

TEST_CASE("wav scaling endpoints") {
  const fs::path dir = temp_dir("wav_scale");
  write_file(dir / "x.wav", raw_wav(1, 16000, 16, {-32768, 32767, 0}));
  const AudioChunk audio = read_wav(dir / "x.wav");
  REQUIRE(audio.samples.size() == 3);
  CHECK(audio.samples[0] == -1.0);
  CHECK(audio.samples[1] == 32767.0 / 32768.0);
  CHECK(audio.samples[2] == 0.0);
}

TEST_CASE("wav of zeros round trips") {
  const fs::path dir = temp_dir("wav_zero");
  AudioChunk zeros;
  zeros.samples.assign(64000, 0.0);
  write_wav(dir / "z.wav", zeros);
  const AudioChunk back = read_wav(dir / "z.wav");
  REQUIRE(back.samples.size() == 64000);
  for (double v : back.samples) CHECK(v == 0.0);
}

TEST_CASE("wav format errors name the field") {
  const fs::path dir = temp_dir("wav_bad");
  write_file(dir / "stereo.wav", raw_wav(2, 16000, 16, {0, 0}));
  CHECK_THROWS_WITH_AS(read_wav(dir / "stereo.wav"), doctest::Contains("channels=2, expected 1"),
                       DataError);

  write_file(dir / "rate.wav", raw_wav(1, 44100, 16, {0}));
  CHECK_THROWS_WITH_AS(read_wav(dir / "rate.wav"), doctest::Contains("sample_rate=44100"), DataError);

  write_file(dir / "bits.wav", raw_wav(1, 16000, 8, {0}));
  CHECK_THROWS_WITH_AS(read_wav(dir / "bits.wav"), doctest::Contains("bits=8"), DataError);

  const std::string full = raw_wav(1, 16000, 16, {1, 2, 3, 4});
  write_file(dir / "trunc.wav", full.substr(0, full.size() - 3));
  CHECK_THROWS_WITH_AS(read_wav(dir / "trunc.wav"), doctest::Contains("truncated"), DataError);

  write_file(dir / "notwav.wav", "hello, not a wav");
  CHECK_THROWS_AS(read_wav(dir / "notwav.wav"), DataError);
}

TEST_CASE("manifest parsing") {
  const fs::path dir = temp_dir("manifest");
  write_file(dir / "good.csv", "path,tags\nx.wav,cp\ny.wav,\n");
  const Manifest m = parse_manifest(dir / "good.csv");
  REQUIRE(m.rows.size() == 2);
  CHECK(m.rows[0].path == "x.wav");
  CHECK(m.rows[0].label.to_string() == "cp");
  CHECK(m.rows[1].label == TagLabel{});

  write_file(dir / "badtag.csv", "path,tags\nx.wav,cp\ny.wav,cz\n");
  CHECK_THROWS_WITH_AS(parse_manifest(dir / "badtag.csv"), doctest::Contains("row 3"), DataError);

  write_file(dir / "badheader.csv", "file,labels\nx.wav,cp\n");
  CHECK_THROWS_WITH_AS(parse_manifest(dir / "badheader.csv"), doctest::Contains("header"), DataError);
}

TEST_CASE("load_dataset reports the failing row") {
  const fs::path dir = temp_dir("load");
  AudioChunk tone;
  tone.samples.assign(4096, 0.0);
  write_wav(dir / "ok.wav", tone);
  write_file(dir / "m.csv", "path,tags\nok.wav,b\nmissing.wav,c\n");
  CHECK_THROWS_WITH_AS(load_dataset(parse_manifest(dir / "m.csv")), doctest::Contains("row 3"),
                       DataError);
}

TEST_CASE("synthetic corpus determinism") {
  Rng a(0), b(0), c(1);
  const auto corpus1 = synth_corpus(a, 6, 10.0);
  const auto corpus2 = synth_corpus(b, 6, 10.0);
  const auto corpus3 = synth_corpus(c, 6, 10.0);
  REQUIRE(corpus1.size() == 6);
  bool identical = true, different = false;
  for (std::size_t i = 0; i < 6; ++i) {
    identical &= corpus1[i].audio.samples == corpus2[i].audio.samples;
    identical &= corpus1[i].label == corpus2[i].label;
    different |= corpus1[i].audio.samples != corpus3[i].audio.samples;
  }
  CHECK(identical);
  CHECK(different);
}

TEST_CASE("synthetic corpus invariants") {
  Rng rng(0);
  const auto corpus = synth_corpus(rng, 100, 10.0);

  bool saw_empty = false;
  for (const auto& chunk : corpus) {
    REQUIRE(chunk.audio.samples.size() == 64000);
    for (double s : chunk.audio.samples) {
      CHECK(s <= 1.0);
      CHECK(s >= -1.0);
    }
    // label bits are exactly the union of interval events
    TagLabel from_truth;
    for (const auto& iv : chunk.truth) {
      CHECK(iv.start_frame >= 0);
      CHECK(iv.start_frame < iv.end_frame);
      CHECK(iv.end_frame <= 124);
      from_truth.bits[static_cast<std::size_t>(iv.event)] = true;
    }
    CHECK(from_truth == chunk.label);
    if (chunk.truth.empty()) {
      saw_empty = true;
      CHECK(chunk.label == TagLabel{});
    }
  }
  CHECK(saw_empty);
}

TEST_CASE("class balance over 500 chunks") {
  Rng rng(0);
  const auto corpus = synth_corpus(rng, 500, 10.0);
  std::array<int, kNumTags> counts{};
  for (const auto& chunk : corpus) {
    for (int e = 0; e < kNumTags; ++e) {
      if (chunk.label.bits[static_cast<std::size_t>(e)]) ++counts[static_cast<std::size_t>(e)];
    }
  }
  for (int e = 0; e < kNumTags; ++e) {
    CHECK(counts[static_cast<std::size_t>(e)] >= 25);  // at least 5%
  }
}

TEST_CASE("save_corpus writes byte-identical manifests for the same seed") {
  const fs::path d1 = temp_dir("corpus1");
  const fs::path d2 = temp_dir("corpus2");
  Rng a(3), b(3);
  save_corpus(synth_corpus(a, 8, 10.0), d1);
  save_corpus(synth_corpus(b, 8, 10.0), d2);
  CHECK(read_file(d1 / "manifest.csv") == read_file(d2 / "manifest.csv"));
  CHECK(read_file(d1 / "truth.csv") == read_file(d2 / "truth.csv"));
  CHECK(read_file(d1 / "chunk_00000.wav") == read_file(d2 / "chunk_00000.wav"));

  // truth row count equals the total interval count
  Rng c(3);
  const auto corpus = synth_corpus(c, 8, 10.0);
  std::size_t intervals = 0;
  for (const auto& chunk : corpus) intervals += chunk.truth.size();
  const std::string truth = read_file(d1 / "truth.csv");
  const std::size_t rows = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), '\n')) - 1;
  CHECK(rows == intervals);

  // the emitted corpus loads back
  const Manifest m = parse_manifest(d1 / "manifest.csv");
  const auto dataset = load_dataset(m);
  REQUIRE(dataset.size() == 8);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    CHECK(dataset[i].mel.rows() == 124);
    CHECK(dataset[i].label == corpus[i].label);
  }
}
