#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "insmt/corpus.hpp"

namespace insmt {

// Corpus-level BLEU, single reference, clipped counts, no smoothing.
struct BleuReport {
  double bleu = 0.0;
  int max_n = 4;
  std::vector<double> precisions;       // p_1..p_max_n
  std::vector<std::size_t> matches;     // clipped n-gram matches per order
  std::vector<std::size_t> totals;      // candidate n-grams per order
  double brevity_penalty = 1.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

inline constexpr const char* kBleuRegime =
    "tokenization=whitespace case=sensitive references=1 smoothing=none level=corpus";

BleuReport bleu(std::span<const TokenList> hypotheses, std::span<const TokenList> references,
                int max_n = 4);

void print_key_values(std::ostream& out, const BleuReport& report);
std::string to_json(const BleuReport& report);

}  // namespace insmt
