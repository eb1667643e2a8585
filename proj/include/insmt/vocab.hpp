#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace insmt {

// Character inventory for one language side.
//
// Ids 0..4 are reserved. Only end-of-token, unknown and real characters can be
// emitted by the decoder, so its output layer covers ids [kEndOfToken, size()).
class CharVocab {
 public:
  static constexpr int kPadding = 0;
  static constexpr int kEmpty = 1;        // stands in for a zero-length chunk
  static constexpr int kBoundary = 2;     // decoder input before the first character
  static constexpr int kEndOfToken = 3;
  static constexpr int kUnknown = 4;
  static constexpr int kFirstCharacter = 5;
  static constexpr int kFirstOutput = kEndOfToken;

  CharVocab() = default;
  // Characters are sorted and deduplicated.
  explicit CharVocab(std::vector<char32_t> characters);

  static CharVocab from_texts(std::span<const std::string> texts);

  int size() const noexcept { return kFirstCharacter + static_cast<int>(characters_.size()); }
  int output_size() const noexcept { return size() - kFirstOutput; }

  int id(char32_t c) const;
  std::vector<int> encode(std::string_view text) const;
  // Id of a decoder output index and back.
  static int output_to_id(int output) noexcept { return output + kFirstOutput; }
  static int id_to_output(int id) noexcept { return id - kFirstOutput; }
  // UTF-8 rendering of a character id; unknown renders as U+FFFD.
  std::string render(int id) const;

  const std::vector<char32_t>& characters() const noexcept { return characters_; }
  bool operator==(const CharVocab& other) const { return characters_ == other.characters_; }

 private:
  std::vector<char32_t> characters_;
  std::unordered_map<char32_t, int> index_;
};

}  // namespace insmt
