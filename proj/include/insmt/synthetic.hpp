#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "insmt/corpus.hpp"

namespace insmt {

enum class ReorderRule { kIdentity, kReverse, kSwapHalves };

std::string_view rule_name(ReorderRule rule);
ReorderRule parse_reorder_rule(std::string_view name);  // ValidationError on unknown names

// Character substitution; characters without an entry map to themselves.
using Cipher = std::map<char32_t, char32_t>;

// Rotates the first n_chars lowercase letters by `shift`.
Cipher shift_cipher(int n_chars, int shift);

struct SyntheticSpec {
  int vocab_size = 50;
  int n_chars = 10;  // alphabet is the first n_chars lowercase letters
  int count = 100;
  int min_length = 3;
  int max_length = 8;
  int min_token_chars = 2;
  int max_token_chars = 4;
  ReorderRule rule = ReorderRule::kIdentity;
  Cipher cipher;
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  std::vector<std::string> lexicon;  // distinct source tokens
  std::vector<SentencePair> pairs;
};

// Throws ValidationError if the settings are inconsistent (for example, more
// tokens requested than strings exist over the alphabet).
void validate(const SyntheticSpec& spec);

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec);

TokenList apply_reorder(std::span<const std::string> tokens, ReorderRule rule);
std::string apply_cipher(std::string_view token, const Cipher& cipher);

}  // namespace insmt
