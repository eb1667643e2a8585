#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace insmt {

using TokenList = std::vector<std::string>;

struct SentencePair {
  TokenList source;
  TokenList target;
  bool operator==(const SentencePair&) const = default;
};

struct Corpus {
  std::vector<SentencePair> pairs;
  std::size_t dropped_empty = 0;
};

TokenList tokenize(std::string_view line);
std::string join(std::span<const std::string> tokens, std::string_view separator = " ");

// Reads UTF-8 lines; fatal on undecodable bytes (reports the line number).
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);

// Pairs lines by position; drops pairs where either side has no tokens.
Corpus corpus_from_lines(std::span<const std::string> source_lines,
                         std::span<const std::string> target_lines, bool lowercase);

// Throws ValidationError on line-count mismatch (naming both counts) or bad UTF-8.
Corpus ingest_corpus(const std::filesystem::path& source_path,
                     const std::filesystem::path& target_path, bool lowercase);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};

// Seeded uniform sample without replacement for the held-out part; both parts
// keep corpus order.
SplitIndices split_indices(std::size_t corpus_size, std::size_t heldout_n, std::uint64_t seed);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_corpus(std::span<const T> items,
                                                       std::size_t heldout_n,
                                                       std::uint64_t seed) {
  SplitIndices idx = split_indices(items.size(), heldout_n, seed);
  std::vector<T> train, heldout;
  train.reserve(idx.train.size());
  heldout.reserve(idx.heldout.size());
  for (std::size_t i : idx.train) train.push_back(items[i]);
  for (std::size_t i : idx.heldout) heldout.push_back(items[i]);
  return {std::move(train), std::move(heldout)};
}

}  // namespace insmt
