#pragma once

// Chunk-by-chunk translation with learned insertion.
//
// The source sentence is read one token at a time. For source token i the
// model forms a target state h_i from the i-th source encoding and the
// previous target chunk, spells a (possibly empty) target chunk character by
// character conditioned on h_i, and inserts the chunk into the growing
// hypothesis at a slot chosen by a feedforward scorer over
// (left neighbour state, right neighbour state, h_i).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "insmt/align.hpp"
#include "insmt/graph.hpp"
#include "insmt/nn.hpp"
#include "insmt/vocab.hpp"

namespace insmt {

struct ModelConfig {
  int hidden_dim = 256;
  int char_embed_dim = 64;
  int max_chunk_chars = 32;
  double init_scale = 0.1;
  bool operator==(const ModelConfig&) const = default;
};

enum class Initialization { kRandom, kZero };

template <typename T>
struct ModelParams {
  ModelConfig config;
  CharVocab source_vocab;
  CharVocab target_vocab;
  ParameterSet<T> params;

  int source_embeddings = -1;  // [Vs, E]
  int target_embeddings = -1;  // [Vt, E], shared by target token encoder and decoder
  nn::LstmParams source_token_fwd, source_token_bwd;        // E -> H
  nn::LstmParams source_sentence_fwd, source_sentence_bwd;  // 2H -> H
  nn::LstmParams target_token_fwd, target_token_bwd;        // E -> H
  nn::LstmParams target_state;                              // 2H (prev chunk) + 2H (s_i) -> H
  nn::LstmParams decoder;                                   // E + H -> H
  int decoder_init_weights = -1;  // [H, H]
  int decoder_init_bias = -1;     // [H]
  int output_weights = -1;        // [Vout, H]
  int output_bias = -1;           // [Vout]
  nn::FeedForwardParams position;  // 3H -> H -> 1
  int boundary_state = -1;         // [H], stands in for a missing neighbour
  int start_token = -1;            // [2H], previous-chunk encoding at i = 1

  int hidden() const { return config.hidden_dim; }

  template <typename U>
  ModelParams<U> cast() const;
};

// Builds the parameter layout and fills it. Layout (names, order, shapes) is a
// pure function of config and vocab sizes.
template <typename T>
ModelParams<T> make_model(const ModelConfig& config, CharVocab source_vocab, CharVocab target_vocab,
                          std::uint64_t seed, Initialization init = Initialization::kRandom);

struct HypothesisEntry {
  std::string chunk;
  int source_index = 0;  // 1-based source position that produced the chunk
  bool operator==(const HypothesisEntry&) const = default;
};

struct PartialHypothesis {
  std::vector<HypothesisEntry> entries;
  std::vector<std::pair<int, int>> history;  // (source index, slot)

  std::size_t size() const noexcept { return entries.size(); }
  std::string text() const;
  bool operator==(const PartialHypothesis&) const = default;
};

// `chunk` becomes entry number `slot` (1-based); later entries shift right.
PartialHypothesis apply_insertion(const PartialHypothesis& hypothesis, std::string chunk,
                                  int source_index, int slot);

// Replays the recorded insertions from an empty hypothesis.
PartialHypothesis replay_history(const PartialHypothesis& hypothesis);

template <typename T>
struct SourceEncoding {
  std::vector<Node<T>> token_vectors;  // e^s_1..N, each 2H
  std::vector<Node<T>> states;         // s_1..N, each 2H
};

template <typename T>
Node<T> encode_source_token(Graph<T>& g, const ModelParams<T>& m, std::string_view token);

template <typename T>
SourceEncoding<T> encode_source_sentence(Graph<T>& g, const ModelParams<T>& m,
                                         std::span<const std::string> tokens);

// "" encodes the reserved empty symbol as a length-1 sequence.
template <typename T>
Node<T> encode_target_token(Graph<T>& g, const ModelParams<T>& m, std::string_view chunk);

// One trg-enc step on (previous chunk encoding ‖ s_i). `previous_chunk` is
// nullopt for the first source position, which uses the learned start vector.
template <typename T>
nn::LstmState<T> target_state_step(Graph<T>& g, const ModelParams<T>& m, Node<T> source_state,
                                   std::optional<std::string_view> previous_chunk,
                                   const nn::LstmState<T>& state);

template <typename T>
nn::LstmState<T> initial_target_state(Graph<T>& g, const ModelParams<T>& m);

// -sum of per-character cross entropies, including the final end-of-token.
template <typename T>
Node<T> chunk_nll(Graph<T>& g, const ModelParams<T>& m, Node<T> target_state, std::string_view chunk);

template <typename T>
Node<T> chunk_log_prob(Graph<T>& g, const ModelParams<T>& m, Node<T> target_state,
                       std::string_view chunk) {
  return scale(chunk_nll(g, m, target_state, chunk), -1.0);
}

// Teacher-forced decoder output distributions: entry t is the distribution over
// decoder outputs after consuming the first t characters of `prefix`
// (t = 0..len). Output index k corresponds to CharVocab::output_to_id(k).
template <typename T>
std::vector<Tensor<T>> decoder_distributions(Graph<T>& g, const ModelParams<T>& m,
                                             Node<T> target_state, std::string_view prefix);

// Unnormalized slot scores for slots 1..m+1. `target_states[k]` is h_{k+1}.
template <typename T>
Node<T> position_scores(Graph<T>& g, const ModelParams<T>& m, Node<T> current_state,
                        const PartialHypothesis& hypothesis, std::span<const Node<T>> target_states);

template <typename T>
Node<T> position_distribution(Graph<T>& g, const ModelParams<T>& m, Node<T> current_state,
                              const PartialHypothesis& hypothesis,
                              std::span<const Node<T>> target_states) {
  return softmax(position_scores(g, m, current_state, hypothesis, target_states));
}

// Negative log-likelihood of the gold chunks (teacher forced) and of the gold
// insertion slot of every non-empty chunk.
template <typename T>
Node<T> sentence_loss(Graph<T>& g, const ModelParams<T>& m, const align::AlignedSentencePair& pair);

// Characters (plus one end-of-token each) and position decisions scored by sentence_loss.
std::size_t output_symbol_count(const align::AlignedSentencePair& pair);

// Supplies forced decisions in place of the model's argmax.
class DecisionOracle {
 public:
  virtual ~DecisionOracle() = default;
  virtual std::string chunk(int source_index) = 0;
  virtual int slot(int source_index, const PartialHypothesis& hypothesis) = 0;
};

// Replays an AlignedSentencePair's gold chunks and slots.
class GoldOracle : public DecisionOracle {
 public:
  explicit GoldOracle(align::AlignedSentencePair pair) : pair_(std::move(pair)) {}
  std::string chunk(int source_index) override;
  int slot(int source_index, const PartialHypothesis& hypothesis) override;

 private:
  align::AlignedSentencePair pair_;
};

struct Translation {
  std::string text;
  PartialHypothesis hypothesis;
  std::vector<std::string> chunks;  // generated chunk per source token, in source order
  std::size_t decoder_steps = 0;
};

// Greedy decoding: argmax characters until end-of-token or `max_chunk_chars`,
// argmax slot for every non-empty chunk. The previously generated chunk is fed
// back into the next target state.
template <typename T>
Translation translate_greedy(const ModelParams<T>& m, std::span<const std::string> source,
                             int max_chunk_chars, DecisionOracle* oracle = nullptr);

}  // namespace insmt
