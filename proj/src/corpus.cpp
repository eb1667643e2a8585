#include "insmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "insmt/errors.hpp"
#include "insmt/utf8.hpp"

namespace insmt {

TokenList tokenize(std::string_view line) {
  TokenList tokens;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) tokens.emplace_back(line.substr(start, i - start));
  }
  return tokens;
}

std::string join(std::span<const std::string> tokens, std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += separator;
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t offset = 0;
    if (!utf8::decode(line, &offset)) {
      throw ValidationError(path.string() + ":" + std::to_string(lines.size() + 1) +
                            ": undecodable UTF-8 at byte " + std::to_string(offset));
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const std::string& line : lines) out << line << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Corpus corpus_from_lines(std::span<const std::string> source_lines,
                         std::span<const std::string> target_lines, bool lowercase) {
  if (source_lines.size() != target_lines.size()) {
    throw ValidationError("line count mismatch: source has " + std::to_string(source_lines.size()) +
                          " lines, target has " + std::to_string(target_lines.size()));
  }
  Corpus corpus;
  for (std::size_t i = 0; i < source_lines.size(); ++i) {
    SentencePair pair;
    pair.source = tokenize(lowercase ? utf8::lowercase(source_lines[i]) : source_lines[i]);
    pair.target = tokenize(lowercase ? utf8::lowercase(target_lines[i]) : target_lines[i]);
    if (pair.source.empty() || pair.target.empty()) {
      ++corpus.dropped_empty;
      continue;
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

Corpus ingest_corpus(const std::filesystem::path& source_path,
                     const std::filesystem::path& target_path, bool lowercase) {
  const std::vector<std::string> src = read_lines(source_path);
  const std::vector<std::string> tgt = read_lines(target_path);
  return corpus_from_lines(src, tgt, lowercase);
}

SplitIndices split_indices(std::size_t corpus_size, std::size_t heldout_n, std::uint64_t seed) {
  if (heldout_n > 0 && heldout_n >= corpus_size) {
    throw ValidationError("held-out size " + std::to_string(heldout_n) +
                          " must be smaller than the corpus (" + std::to_string(corpus_size) + ")");
  }
  std::vector<std::size_t> order(corpus_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first heldout_n slots become the sample.
  for (std::size_t i = 0; i < heldout_n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, corpus_size - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<char> held(corpus_size, 0);
  for (std::size_t i = 0; i < heldout_n; ++i) held[order[i]] = 1;
  SplitIndices split;
  for (std::size_t i = 0; i < corpus_size; ++i) (held[i] ? split.heldout : split.train).push_back(i);
  return split;
}

}  // namespace insmt
