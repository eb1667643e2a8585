#include "insmt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "insmt/errors.hpp"
#include "insmt/utf8.hpp"

namespace insmt {

std::string_view rule_name(ReorderRule rule) {
  switch (rule) {
    case ReorderRule::kIdentity: return "identity";
    case ReorderRule::kReverse: return "reverse";
    case ReorderRule::kSwapHalves: return "swap-halves";
  }
  return "identity";
}

ReorderRule parse_reorder_rule(std::string_view name) {
  for (ReorderRule rule : {ReorderRule::kIdentity, ReorderRule::kReverse, ReorderRule::kSwapHalves}) {
    if (rule_name(rule) == name) return rule;
  }
  throw ValidationError("unknown reorder rule '" + std::string(name) +
                        "' (expected identity, reverse or swap-halves)");
}

Cipher shift_cipher(int n_chars, int shift) {
  if (n_chars < 1 || n_chars > 26) throw ValidationError("shift_cipher: n_chars must be in 1..26");
  Cipher cipher;
  for (int k = 0; k < n_chars; ++k) {
    const int to = ((k + shift) % n_chars + n_chars) % n_chars;
    cipher[static_cast<char32_t>(U'a' + k)] = static_cast<char32_t>(U'a' + to);
  }
  return cipher;
}

void validate(const SyntheticSpec& spec) {
  if (spec.n_chars < 1 || spec.n_chars > 26) throw ValidationError("n_chars must be in 1..26");
  if (spec.vocab_size < 1) throw ValidationError("vocab_size must be positive");
  if (spec.count < 0) throw ValidationError("count must be non-negative");
  if (spec.min_length < 1 || spec.max_length < spec.min_length) {
    throw ValidationError("sentence length range must satisfy 1 <= min <= max");
  }
  if (spec.min_token_chars < 1 || spec.max_token_chars < spec.min_token_chars) {
    throw ValidationError("token length range must satisfy 1 <= min <= max");
  }
  double available = 0.0;
  for (int len = spec.min_token_chars; len <= spec.max_token_chars; ++len) {
    available += std::pow(static_cast<double>(spec.n_chars), len);
  }
  if (available < spec.vocab_size) {
    throw ValidationError("vocab_size " + std::to_string(spec.vocab_size) +
                          " exceeds the number of distinct tokens over the alphabet");
  }
}

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> char_dist(0, spec.n_chars - 1);
  std::uniform_int_distribution<int> token_len(spec.min_token_chars, spec.max_token_chars);
  std::uniform_int_distribution<int> sentence_len(spec.min_length, spec.max_length);

  SyntheticCorpus corpus;
  std::set<std::string> seen;
  while (static_cast<int>(corpus.lexicon.size()) < spec.vocab_size) {
    std::string token;
    const int len = token_len(rng);
    for (int k = 0; k < len; ++k) token.push_back(static_cast<char>('a' + char_dist(rng)));
    if (seen.insert(token).second) corpus.lexicon.push_back(token);
  }
  std::uniform_int_distribution<std::size_t> pick(0, corpus.lexicon.size() - 1);
  corpus.pairs.reserve(static_cast<std::size_t>(spec.count));
  for (int s = 0; s < spec.count; ++s) {
    SentencePair pair;
    const int len = sentence_len(rng);
    for (int k = 0; k < len; ++k) pair.source.push_back(corpus.lexicon[pick(rng)]);
    for (const auto& token : apply_reorder(pair.source, spec.rule)) {
      pair.target.push_back(apply_cipher(token, spec.cipher));
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

TokenList apply_reorder(std::span<const std::string> tokens, ReorderRule rule) {
  TokenList out(tokens.begin(), tokens.end());
  switch (rule) {
    case ReorderRule::kIdentity:
      break;
    case ReorderRule::kReverse:
      std::reverse(out.begin(), out.end());
      break;
    case ReorderRule::kSwapHalves:
      std::rotate(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(out.size() / 2), out.end());
      break;
  }
  return out;
}

std::string apply_cipher(std::string_view token, const Cipher& cipher) {
  std::u32string text = utf8::decode_or_throw(token);
  for (char32_t& c : text) {
    auto it = cipher.find(c);
    if (it != cipher.end()) c = it->second;
  }
  return utf8::encode(text);
}

}  // namespace insmt
