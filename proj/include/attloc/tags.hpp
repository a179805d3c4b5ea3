#pragma once

#include <array>
#include <cstddef>
#include <string>

namespace attloc {

// The seven event tags, fixed alphabetical order: broadband noise, child
// speech, adult female speech, adult male speech, other, percussive, TV.
inline constexpr int kNumTags = 7;
inline constexpr std::array<char, kNumTags> kTagLetters = {'b', 'c', 'f', 'm', 'o', 'p', 'v'};

// Index of a tag letter, or -1 if unknown.
constexpr int tag_index(char letter) {
  for (int i = 0; i < kNumTags; ++i) {
    if (kTagLetters[i] == letter) return i;
  }
  return -1;
}

// Multi-hot reference label over the tag alphabet. All-zero is valid
// (a silence chunk carries no tags).
struct TagLabel {
  std::array<bool, kNumTags> bits{};

  bool operator==(const TagLabel&) const = default;

  std::string to_string() const {
    std::string s;
    for (int i = 0; i < kNumTags; ++i) {
      if (bits[i]) s.push_back(kTagLetters[i]);
    }
    return s;
  }
};

}  // namespace attloc
