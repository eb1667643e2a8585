#include "insmt/align.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "insmt/errors.hpp"

namespace insmt::align {

double ProbMatrix::row_sum(int i) const {
  double total = 0.0;
  for (int j = 0; j < cols; ++j) total += at(i, j);
  return total;
}

void validate(const ProbMatrix& m) {
  if (m.data.size() != static_cast<std::size_t>(m.rows) * m.cols) {
    throw ValidationError("posterior matrix storage does not match its shape");
  }
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      const double p = m.at(i, j);
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError("posterior (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                              ") = " + std::to_string(p) + " outside [0,1]");
      }
    }
    if (m.row_sum(i) > 1.0 + kRowSumTolerance) {
      throw ValidationError("posterior row " + std::to_string(i + 1) + " sums to " +
                            std::to_string(m.row_sum(i)));
    }
  }
}

void validate(const AlignmentPosteriors& p) {
  if (p.forward.rows != p.backward.cols || p.forward.cols != p.backward.rows) {
    throw ValidationError("forward " + std::to_string(p.forward.rows) + "x" +
                          std::to_string(p.forward.cols) + " and backward " +
                          std::to_string(p.backward.rows) + "x" + std::to_string(p.backward.cols) +
                          " posteriors are not transposed shapes");
  }
  validate(p.forward);
  validate(p.backward);
}

// ---------------------------------------------------------------------------

namespace {

class Interner {
 public:
  int id(const std::string& token) {
    auto [it, inserted] = ids_.emplace(token, static_cast<int>(ids_.size()));
    return it->second;
  }
  int size() const { return static_cast<int>(ids_.size()); }

 private:
  std::unordered_map<std::string, int> ids_;
};

std::uint64_t pair_key(int conditioning, int generated) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(conditioning)) << 32) |
         static_cast<std::uint32_t>(generated);
}

}  // namespace

DirectionalPosteriors estimate_directional(std::span<const TokenList> generated,
                                           std::span<const TokenList> conditioning,
                                           const Ibm1Options& options) {
  if (generated.size() != conditioning.size()) {
    throw ContractViolation("estimate_directional: sides differ in sentence count");
  }
  if (generated.empty()) throw ContractViolation("estimate_directional: empty corpus");
  if (options.iterations <= 0) throw ContractViolation("estimate_directional: iterations must be positive");
  if (!(options.alpha >= 0.0)) throw ContractViolation("estimate_directional: alpha must be nonnegative");

  // Conditioning id 0 is NULL.
  Interner gen_vocab, cond_vocab;
  cond_vocab.id(std::string("\0NULL", 5));
  std::vector<std::vector<int>> gen_ids(generated.size()), cond_ids(generated.size());
  std::vector<char> usable(generated.size(), 0);
  DirectionalPosteriors result;
  for (std::size_t s = 0; s < generated.size(); ++s) {
    if (generated[s].empty() || conditioning[s].empty()) {
      ++result.skipped;
      continue;
    }
    usable[s] = 1;
    for (const auto& t : generated[s]) gen_ids[s].push_back(gen_vocab.id(t));
    for (const auto& t : conditioning[s]) cond_ids[s].push_back(cond_vocab.id(t));
  }
  const double gen_size = std::max(1, gen_vocab.size());

  // t(g | c); absent keys mean "never co-occurred", which posteriors never query.
  std::unordered_map<std::uint64_t, double> table;
  std::vector<double> cond_total(static_cast<std::size_t>(cond_vocab.size()), 0.0);
  auto prob = [&](int c, int g, bool first_iteration) {
    if (first_iteration) return 1.0 / gen_size;
    auto it = table.find(pair_key(c, g));
    const double count = it == table.end() ? 0.0 : it->second;
    return (count + options.alpha) / (cond_total[static_cast<std::size_t>(c)] + options.alpha * gen_size);
  };

  std::vector<double> weights;
  for (int iter = 0; iter < options.iterations; ++iter) {
    std::unordered_map<std::uint64_t, double> counts;
    std::vector<double> totals(cond_total.size(), 0.0);
    for (std::size_t s = 0; s < generated.size(); ++s) {
      if (!usable[s]) continue;
      for (int g : gen_ids[s]) {
        weights.clear();
        double denom = 0.0;
        if (options.use_null) denom += prob(0, g, iter == 0);
        for (int c : cond_ids[s]) {
          weights.push_back(prob(c, g, iter == 0));
          denom += weights.back();
        }
        if (denom <= 0.0) continue;
        if (options.use_null) {
          const double w = prob(0, g, iter == 0) / denom;
          counts[pair_key(0, g)] += w;
          totals[0] += w;
        }
        for (std::size_t k = 0; k < cond_ids[s].size(); ++k) {
          const double w = weights[k] / denom;
          counts[pair_key(cond_ids[s][k], g)] += w;
          totals[static_cast<std::size_t>(cond_ids[s][k])] += w;
        }
      }
    }
    table = std::move(counts);
    cond_total = std::move(totals);
  }

  result.matrices.reserve(generated.size());
  for (std::size_t s = 0; s < generated.size(); ++s) {
    ProbMatrix m(static_cast<int>(generated[s].size()), static_cast<int>(conditioning[s].size()));
    if (usable[s]) {
      for (int i = 0; i < m.rows; ++i) {
        const int g = gen_ids[s][static_cast<std::size_t>(i)];
        double denom = options.use_null ? prob(0, g, false) : 0.0;
        for (int j = 0; j < m.cols; ++j) {
          m.at(i, j) = prob(cond_ids[s][static_cast<std::size_t>(j)], g, false);
          denom += m.at(i, j);
        }
        for (int j = 0; j < m.cols; ++j) m.at(i, j) = denom > 0.0 ? m.at(i, j) / denom : 0.0;
      }
    }
    result.matrices.push_back(std::move(m));
  }
  return result;
}

PosteriorEstimate estimate_posteriors(std::span<const SentencePair> corpus,
                                      const Ibm1Options& options) {
  std::vector<TokenList> source, target;
  source.reserve(corpus.size());
  target.reserve(corpus.size());
  for (const auto& pair : corpus) {
    source.push_back(pair.source);
    target.push_back(pair.target);
  }
  DirectionalPosteriors fwd = estimate_directional(source, target, options);
  DirectionalPosteriors bwd = estimate_directional(target, source, options);
  PosteriorEstimate estimate;
  estimate.skipped = fwd.skipped;
  estimate.sentences.reserve(corpus.size());
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    estimate.sentences.push_back({std::move(fwd.matrices[s]), std::move(bwd.matrices[s])});
  }
  return estimate;
}

// ---------------------------------------------------------------------------

std::vector<AlignedPair> extract_one_to_one(const AlignmentPosteriors& posteriors, double tau) {
  const int n = posteriors.forward.rows;
  const int m = posteriors.forward.cols;
  if (posteriors.backward.rows != m || posteriors.backward.cols != n) {
    throw DimensionError("extract_one_to_one: forward and backward shapes are inconsistent");
  }
  struct Candidate {
    double score;
    int source;
    int target;
  };
  std::vector<Candidate> candidates;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      const double s = link_score(posteriors, i, j);
      if (s >= tau) candidates.push_back({s, i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.source != b.source) return a.source < b.source;
    return a.target < b.target;
  });
  std::vector<char> source_used(static_cast<std::size_t>(n) + 1, 0);
  std::vector<char> target_used(static_cast<std::size_t>(m) + 1, 0);
  std::vector<AlignedPair> pairs;
  for (const Candidate& c : candidates) {
    if (source_used[static_cast<std::size_t>(c.source)] || target_used[static_cast<std::size_t>(c.target)]) continue;
    source_used[static_cast<std::size_t>(c.source)] = 1;
    target_used[static_cast<std::size_t>(c.target)] = 1;
    pairs.push_back({c.source, c.target});
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

// ---------------------------------------------------------------------------

std::vector<std::optional<int>> derive_gold_insertions(
    std::span<const std::optional<int>> gold_target_index) {
  std::vector<int> inserted;
  std::vector<std::optional<int>> positions;
  positions.reserve(gold_target_index.size());
  for (const auto& index : gold_target_index) {
    if (!index) {
      positions.push_back(std::nullopt);
      continue;
    }
    if (std::find(inserted.begin(), inserted.end(), *index) != inserted.end()) {
      throw ContractViolation("derive_gold_insertions: duplicate target index " +
                              std::to_string(*index));
    }
    const auto smaller = std::count_if(inserted.begin(), inserted.end(),
                                       [&](int other) { return other < *index; });
    positions.push_back(static_cast<int>(smaller) + 1);
    inserted.push_back(*index);
  }
  return positions;
}

std::vector<std::string> replay_insertions(std::span<const std::string> chunks,
                                           std::span<const std::optional<int>> insertions) {
  if (chunks.size() != insertions.size()) {
    throw ContractViolation("replay_insertions: chunk and insertion lists differ in length");
  }
  std::vector<std::string> hypothesis;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (!insertions[i]) continue;
    const int slot = *insertions[i];
    if (slot < 1 || slot > static_cast<int>(hypothesis.size()) + 1) {
      throw ContractViolation("replay_insertions: slot " + std::to_string(slot) + " outside 1.." +
                              std::to_string(hypothesis.size() + 1));
    }
    hypothesis.insert(hypothesis.begin() + (slot - 1), chunks[i]);
  }
  return hypothesis;
}

std::optional<AlignedSentencePair> build_training_sequence(const TokenList& source,
                                                           const TokenList& target,
                                                           std::span<const AlignedPair> pairs) {
  const int n = static_cast<int>(source.size());
  const int m = static_cast<int>(target.size());
  std::vector<int> source_of_target(static_cast<std::size_t>(m) + 1, 0);
  std::vector<char> source_used(static_cast<std::size_t>(n) + 1, 0);
  for (const AlignedPair& p : pairs) {
    if (p.source < 1 || p.source > n || p.target < 1 || p.target > m) {
      throw ContractViolation("build_training_sequence: link (" + std::to_string(p.source) + "," +
                              std::to_string(p.target) + ") out of range");
    }
    if (source_used[static_cast<std::size_t>(p.source)] || source_of_target[static_cast<std::size_t>(p.target)]) {
      throw ContractViolation("build_training_sequence: links are not 1-to-1");
    }
    source_used[static_cast<std::size_t>(p.source)] = 1;
    source_of_target[static_cast<std::size_t>(p.target)] = p.source;
  }
  if (pairs.empty()) return std::nullopt;

  AlignedSentencePair out;
  out.source_tokens = source;
  out.chunks.assign(static_cast<std::size_t>(n), std::string());
  out.gold_target_index.assign(static_cast<std::size_t>(n), std::nullopt);

  std::string leading;
  int owner = 0;  // source position owning the chunk being extended
  int order = 0;
  for (int j = 1; j <= m; ++j) {
    const std::string& word = target[static_cast<std::size_t>(j - 1)];
    const int i = source_of_target[static_cast<std::size_t>(j)];
    if (i) {
      owner = i;
      std::string& chunk = out.chunks[static_cast<std::size_t>(i - 1)];
      chunk = leading.empty() ? word : leading + " " + word;
      leading.clear();
      out.gold_target_index[static_cast<std::size_t>(i - 1)] = ++order;
    } else if (owner) {
      out.chunks[static_cast<std::size_t>(owner - 1)] += " " + word;
    } else {
      leading = leading.empty() ? word : leading + " " + word;
    }
  }
  out.gold_insertion = derive_gold_insertions(out.gold_target_index);
  return out;
}

std::string merged_target(const AlignedSentencePair& pair) {
  std::vector<std::pair<int, const std::string*>> ordered;
  for (std::size_t i = 0; i < pair.chunks.size(); ++i) {
    if (pair.gold_target_index[i]) ordered.emplace_back(*pair.gold_target_index[i], &pair.chunks[i]);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    if (k) out += ' ';
    out += *ordered[k].second;
  }
  return out;
}

void check_invariants(const AlignedSentencePair& pair) {
  const std::size_t n = pair.source_tokens.size();
  if (pair.chunks.size() != n || pair.gold_target_index.size() != n || pair.gold_insertion.size() != n) {
    throw ValidationError("aligned pair lists differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const bool has_chunk = !pair.chunks[i].empty();
    if (has_chunk != pair.gold_target_index[i].has_value() ||
        has_chunk != pair.gold_insertion[i].has_value()) {
      throw ValidationError("chunk " + std::to_string(i + 1) +
                            ": gold annotations must be present exactly for non-empty chunks");
    }
  }
  if (derive_gold_insertions(pair.gold_target_index) != pair.gold_insertion) {
    throw ValidationError("gold insertions disagree with gold target order");
  }
}

SequenceBuildResult build_training_sequences(std::span<const SentencePair> corpus,
                                             std::span<const AlignmentPosteriors> posteriors,
                                             double tau) {
  if (corpus.size() != posteriors.size()) {
    throw ContractViolation("build_training_sequences: " + std::to_string(corpus.size()) +
                            " sentences but " + std::to_string(posteriors.size()) + " posteriors");
  }
  SequenceBuildResult result;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const SentencePair& pair = corpus[s];
    const AlignmentPosteriors& post = posteriors[s];
    if (pair.source.empty() || pair.target.empty()) {
      ++result.dropped_skipped;
      continue;
    }
    if (post.forward.rows != static_cast<int>(pair.source.size()) ||
        post.forward.cols != static_cast<int>(pair.target.size())) {
      throw ValidationError("sentence " + std::to_string(s + 1) + ": posterior shape " +
                            std::to_string(post.forward.rows) + "x" + std::to_string(post.forward.cols) +
                            " does not match " + std::to_string(pair.source.size()) + "x" +
                            std::to_string(pair.target.size()) + " tokens");
    }
    const std::vector<AlignedPair> links = extract_one_to_one(post, tau);
    auto built = build_training_sequence(pair.source, pair.target, links);
    if (!built) {
      ++result.dropped_no_links;
      continue;
    }
    result.pairs.push_back(std::move(*built));
  }
  return result;
}

}  // namespace insmt::align
