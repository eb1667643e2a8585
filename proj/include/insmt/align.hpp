#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "insmt/corpus.hpp"

namespace insmt::align {

// Dense row-major probability matrix; either side may be zero for skipped sentences.
struct ProbMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  ProbMatrix() = default;
  ProbMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
  double row_sum(int i) const;
  bool operator==(const ProbMatrix&) const = default;
};

// forward(i, j) = P_f(a_i = j), N x M.  backward(j, i) = P_b(a_j = i), M x N.
// Indices here are 0-based; files and AlignedPair use 1-based positions.
struct AlignmentPosteriors {
  ProbMatrix forward;
  ProbMatrix backward;
  bool operator==(const AlignmentPosteriors&) const = default;
};

inline constexpr double kRowSumTolerance = 1e-6;

// Entries in [0,1], rows sum to at most 1 + kRowSumTolerance.  Throws ValidationError.
void validate(const ProbMatrix& m);
void validate(const AlignmentPosteriors& p);

// ---------------------------------------------------------------------------
// Stand-in aligner: IBM Model 1 with a NULL word and add-alpha smoothing.

struct Ibm1Options {
  int iterations = 5;
  double alpha = 0.01;
  bool use_null = true;
};

struct DirectionalPosteriors {
  // One matrix per sentence: rows = generated positions, cols = conditioning positions.
  std::vector<ProbMatrix> matrices;
  std::size_t skipped = 0;
};

// Each generated token picks one conditioning position (or NULL). Row i of
// the result holds P(a_i = j); NULL mass is the row remainder.
DirectionalPosteriors estimate_directional(std::span<const TokenList> generated,
                                           std::span<const TokenList> conditioning,
                                           const Ibm1Options& options);

struct PosteriorEstimate {
  std::vector<AlignmentPosteriors> sentences;
  std::size_t skipped = 0;
};

// Runs the model once per direction.
PosteriorEstimate estimate_posteriors(std::span<const SentencePair> corpus,
                                      const Ibm1Options& options);

// ---------------------------------------------------------------------------
// Confident 1-to-1 links

struct AlignedPair {
  int source = 0;  // 1-based
  int target = 0;  // 1-based
  auto operator<=>(const AlignedPair&) const = default;
};

inline double link_score(const AlignmentPosteriors& p, int source, int target) {
  return p.forward.at(source - 1, target - 1) * p.backward.at(target - 1, source - 1);
}

// Repeatedly takes the unused link with the highest P_f * P_b (ties: lower
// source, then lower target) while the score is at least tau. Result sorted.
std::vector<AlignedPair> extract_one_to_one(const AlignmentPosteriors& posteriors, double tau);

// ---------------------------------------------------------------------------
// Same-length training sequences

struct AlignedSentencePair {
  TokenList source_tokens;
  std::vector<std::string> chunks;                 // one per source token, may be ""
  std::vector<std::optional<int>> gold_target_index;  // order in the reference, non-empty chunks only
  std::vector<std::optional<int>> gold_insertion;     // slot k_i, non-empty chunks only
  bool operator==(const AlignedSentencePair&) const = default;
};

// Unaligned source tokens produce "". A source token aligned to target j
// produces target[j] plus the unaligned target tokens that follow it; target
// tokens before the first aligned one are prepended to that first chunk.
// Returns nullopt when `pairs` is empty.
std::optional<AlignedSentencePair> build_training_sequence(const TokenList& source,
                                                           const TokenList& target,
                                                           std::span<const AlignedPair> pairs);

// Insertion slot of each non-empty chunk when chunks arrive in source order:
// 1 + number of earlier chunks with a smaller target index.
std::vector<std::optional<int>> derive_gold_insertions(
    std::span<const std::optional<int>> gold_target_index);

// Inserts each chunk with a slot at that 1-based slot; returns the final order.
std::vector<std::string> replay_insertions(std::span<const std::string> chunks,
                                           std::span<const std::optional<int>> insertions);

// Non-empty chunks in gold order joined with single spaces.
std::string merged_target(const AlignedSentencePair& pair);

void check_invariants(const AlignedSentencePair& pair);

struct SequenceBuildResult {
  std::vector<AlignedSentencePair> pairs;
  std::size_t dropped_no_links = 0;
  std::size_t dropped_skipped = 0;
};

// Extraction plus sequence building over a corpus; `posteriors` aligns with `corpus`.
SequenceBuildResult build_training_sequences(std::span<const SentencePair> corpus,
                                             std::span<const AlignmentPosteriors> posteriors,
                                             double tau);

// ---------------------------------------------------------------------------
// Text formats

// Records of "rows cols" followed by "i j p" lines (1-based, zero entries
// omitted), separated by blank lines. One file per direction.
void write_posterior_matrices(std::ostream& out, std::span<const ProbMatrix> matrices);
std::vector<ProbMatrix> read_posterior_matrices(std::istream& in);

void export_posteriors(const std::filesystem::path& forward_path,
                       const std::filesystem::path& backward_path,
                       std::span<const AlignmentPosteriors> posteriors);
std::vector<AlignmentPosteriors> import_posteriors(const std::filesystem::path& forward_path,
                                                   const std::filesystem::path& backward_path);

// One line per source token: token TAB chunk TAB gold-index-or-dash, where the
// chunk's spaces are written as U+001F. Blank line ends a sentence.
inline constexpr char kUnitSeparator = '\x1f';
void write_chunked(std::ostream& out, std::span<const AlignedSentencePair> pairs);
std::vector<AlignedSentencePair> read_chunked(std::istream& in);
std::vector<AlignedSentencePair> read_chunked_file(const std::filesystem::path& path);
void write_chunked_file(const std::filesystem::path& path,
                        std::span<const AlignedSentencePair> pairs);

}  // namespace insmt::align
