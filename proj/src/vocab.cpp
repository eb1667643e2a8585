#include "insmt/vocab.hpp"

#include <algorithm>
#include <set>

#include "insmt/errors.hpp"
#include "insmt/utf8.hpp"

namespace insmt {

CharVocab::CharVocab(std::vector<char32_t> characters) : characters_(std::move(characters)) {
  std::sort(characters_.begin(), characters_.end());
  characters_.erase(std::unique(characters_.begin(), characters_.end()), characters_.end());
  for (std::size_t i = 0; i < characters_.size(); ++i) {
    index_.emplace(characters_[i], kFirstCharacter + static_cast<int>(i));
  }
}

CharVocab CharVocab::from_texts(std::span<const std::string> texts) {
  std::set<char32_t> seen;
  for (const std::string& text : texts) {
    for (char32_t c : utf8::decode_or_throw(text)) seen.insert(c);
  }
  return CharVocab(std::vector<char32_t>(seen.begin(), seen.end()));
}

int CharVocab::id(char32_t c) const {
  auto it = index_.find(c);
  return it == index_.end() ? kUnknown : it->second;
}

std::vector<int> CharVocab::encode(std::string_view text) const {
  std::vector<int> ids;
  for (char32_t c : utf8::decode_or_throw(text)) ids.push_back(id(c));
  return ids;
}

std::string CharVocab::render(int id) const {
  if (id >= kFirstCharacter && id < size()) {
    return utf8::encode(characters_[static_cast<std::size_t>(id - kFirstCharacter)]);
  }
  if (id == kUnknown) return utf8::encode(char32_t{0xFFFD});
  throw IndexError("character id " + std::to_string(id) + " has no rendering");
}

}  // namespace insmt
