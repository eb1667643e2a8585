#include "insmt/model.hpp"

#include <algorithm>
#include <random>

#include "insmt/errors.hpp"
#include "insmt/utf8.hpp"

namespace insmt {

template <typename T>
ModelParams<T> make_model(const ModelConfig& config, CharVocab source_vocab, CharVocab target_vocab,
                          std::uint64_t seed, Initialization init) {
  if (config.hidden_dim <= 0 || config.char_embed_dim <= 0 || config.max_chunk_chars <= 0) {
    throw ContractViolation("make_model: dimensions and chunk cap must be positive");
  }
  const int H = config.hidden_dim;
  const int E = config.char_embed_dim;
  ModelParams<T> m;
  m.config = config;
  m.source_vocab = std::move(source_vocab);
  m.target_vocab = std::move(target_vocab);
  ParameterSet<T>& p = m.params;

  m.source_embeddings = p.add("source_embeddings", Tensor<T>({m.source_vocab.size(), E}));
  m.target_embeddings = p.add("target_embeddings", Tensor<T>({m.target_vocab.size(), E}));
  m.source_token_fwd = nn::add_lstm(p, "source_token_encoder.forward", E, H);
  m.source_token_bwd = nn::add_lstm(p, "source_token_encoder.backward", E, H);
  m.source_sentence_fwd = nn::add_lstm(p, "source_sentence_encoder.forward", 2 * H, H);
  m.source_sentence_bwd = nn::add_lstm(p, "source_sentence_encoder.backward", 2 * H, H);
  m.target_token_fwd = nn::add_lstm(p, "target_token_encoder.forward", E, H);
  m.target_token_bwd = nn::add_lstm(p, "target_token_encoder.backward", E, H);
  m.target_state = nn::add_lstm(p, "target_state_encoder", 4 * H, H);
  m.decoder = nn::add_lstm(p, "target_token_decoder", E + H, H);
  m.decoder_init_weights = p.add("target_token_decoder.init_weights", Tensor<T>({H, H}));
  m.decoder_init_bias = p.add("target_token_decoder.init_bias", Tensor<T>({H}));
  m.output_weights = p.add("target_token_decoder.output_weights", Tensor<T>({m.target_vocab.output_size(), H}));
  m.output_bias = p.add("target_token_decoder.output_bias", Tensor<T>({m.target_vocab.output_size()}));
  m.position = nn::add_feedforward(p, "position", 3 * H, H);
  m.boundary_state = p.add("position.boundary_state", Tensor<T>({H}));
  m.start_token = p.add("target_state_encoder.start_token", Tensor<T>({2 * H}));

  if (init == Initialization::kRandom) {
    std::mt19937_64 rng(seed);
    const double s = config.init_scale;
    nn::initialize_uniform(p[m.source_embeddings].value, s, rng);
    nn::initialize_uniform(p[m.target_embeddings].value, s, rng);
    for (const nn::LstmParams* lstm :
         {&m.source_token_fwd, &m.source_token_bwd, &m.source_sentence_fwd, &m.source_sentence_bwd,
          &m.target_token_fwd, &m.target_token_bwd, &m.target_state, &m.decoder}) {
      nn::initialize_lstm(p, *lstm, s, rng);
    }
    nn::initialize_uniform(p[m.decoder_init_weights].value, s, rng);
    nn::initialize_uniform(p[m.output_weights].value, s, rng);
    nn::initialize_uniform(p[m.position.w1].value, s, rng);
    nn::initialize_uniform(p[m.position.w2].value, s, rng);
    nn::initialize_uniform(p[m.boundary_state].value, s, rng);
    nn::initialize_uniform(p[m.start_token].value, s, rng);
  }
  return m;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.config = config;
  out.source_vocab = source_vocab;
  out.target_vocab = target_vocab;
  out.params = params.template cast<U>();
  out.source_embeddings = source_embeddings;
  out.target_embeddings = target_embeddings;
  out.source_token_fwd = source_token_fwd;
  out.source_token_bwd = source_token_bwd;
  out.source_sentence_fwd = source_sentence_fwd;
  out.source_sentence_bwd = source_sentence_bwd;
  out.target_token_fwd = target_token_fwd;
  out.target_token_bwd = target_token_bwd;
  out.target_state = target_state;
  out.decoder = decoder;
  out.decoder_init_weights = decoder_init_weights;
  out.decoder_init_bias = decoder_init_bias;
  out.output_weights = output_weights;
  out.output_bias = output_bias;
  out.position = position;
  out.boundary_state = boundary_state;
  out.start_token = start_token;
  return out;
}

// ---------------------------------------------------------------------------

std::string PartialHypothesis::text() const {
  std::string out;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (k) out += ' ';
    out += entries[k].chunk;
  }
  return out;
}

PartialHypothesis apply_insertion(const PartialHypothesis& hypothesis, std::string chunk,
                                  int source_index, int slot) {
  if (chunk.empty()) throw ContractViolation("apply_insertion: empty chunks are never inserted");
  const int m = static_cast<int>(hypothesis.entries.size());
  if (slot < 1 || slot > m + 1) {
    throw ContractViolation("apply_insertion: slot " + std::to_string(slot) + " outside 1.." +
                            std::to_string(m + 1));
  }
  PartialHypothesis out = hypothesis;
  out.entries.insert(out.entries.begin() + (slot - 1), HypothesisEntry{std::move(chunk), source_index});
  out.history.emplace_back(source_index, slot);
  return out;
}

PartialHypothesis replay_history(const PartialHypothesis& hypothesis) {
  std::vector<const HypothesisEntry*> by_source;
  for (const auto& [source, slot] : hypothesis.history) {
    auto it = std::find_if(hypothesis.entries.begin(), hypothesis.entries.end(),
                           [&](const HypothesisEntry& e) { return e.source_index == source; });
    if (it == hypothesis.entries.end()) throw ContractViolation("history names an unknown source index");
    by_source.push_back(&*it);
  }
  PartialHypothesis out;
  for (std::size_t k = 0; k < by_source.size(); ++k) {
    out = apply_insertion(out, by_source[k]->chunk, hypothesis.history[k].first,
                          hypothesis.history[k].second);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
std::vector<Node<T>> embed(Graph<T>& g, int table, std::span<const int> ids) {
  Node<T> t = g.parameter(table);
  std::vector<Node<T>> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(embedding_lookup(t, id));
  return out;
}

template <typename T>
nn::LstmState<T> decoder_initial_state(Graph<T>& g, const ModelParams<T>& m, Node<T> target_state) {
  Node<T> h0 = add(matmul(g.parameter(m.decoder_init_weights), target_state), g.parameter(m.decoder_init_bias));
  Node<T> c0 = g.input(Tensor<T>({m.hidden()}));
  return {h0, c0};
}

// One decoder step: consume `input_id`, return logits over decoder outputs.
template <typename T>
Node<T> decoder_step(Graph<T>& g, const ModelParams<T>& m, Node<T> target_state, int input_id,
                     nn::LstmState<T>& state) {
  Node<T> x = concat({embedding_lookup(g.parameter(m.target_embeddings), input_id), target_state});
  state = nn::lstm_step(g, m.decoder, x, state);
  return add(matmul(g.parameter(m.output_weights), state.h), g.parameter(m.output_bias));
}

template <typename T>
int argmax(const Tensor<T>& v) {
  return static_cast<int>(std::max_element(v.data(), v.data() + v.size()) - v.data());
}

}  // namespace

template <typename T>
Node<T> encode_source_token(Graph<T>& g, const ModelParams<T>& m, std::string_view token) {
  const std::vector<int> ids = m.source_vocab.encode(token);
  if (ids.empty()) throw ContractViolation("encode_source_token: empty token");
  const std::vector<Node<T>> xs = embed(g, m.source_embeddings, std::span<const int>(ids));
  return nn::final_state(g, m.source_token_fwd, m.source_token_bwd, std::span<const Node<T>>(xs));
}

template <typename T>
SourceEncoding<T> encode_source_sentence(Graph<T>& g, const ModelParams<T>& m,
                                         std::span<const std::string> tokens) {
  if (tokens.empty()) throw ContractViolation("encode_source_sentence: empty sentence");
  SourceEncoding<T> enc;
  enc.token_vectors.reserve(tokens.size());
  for (const std::string& token : tokens) enc.token_vectors.push_back(encode_source_token(g, m, token));
  enc.states = nn::bilstm_encode(g, m.source_sentence_fwd, m.source_sentence_bwd,
                                 std::span<const Node<T>>(enc.token_vectors));
  return enc;
}

template <typename T>
Node<T> encode_target_token(Graph<T>& g, const ModelParams<T>& m, std::string_view chunk) {
  std::vector<int> ids = m.target_vocab.encode(chunk);
  if (ids.empty()) ids.push_back(CharVocab::kEmpty);
  const std::vector<Node<T>> xs = embed(g, m.target_embeddings, std::span<const int>(ids));
  return nn::final_state(g, m.target_token_fwd, m.target_token_bwd, std::span<const Node<T>>(xs));
}

template <typename T>
nn::LstmState<T> initial_target_state(Graph<T>& g, const ModelParams<T>& m) {
  return nn::zero_state(g, m.target_state);
}

template <typename T>
nn::LstmState<T> target_state_step(Graph<T>& g, const ModelParams<T>& m, Node<T> source_state,
                                   std::optional<std::string_view> previous_chunk,
                                   const nn::LstmState<T>& state) {
  Node<T> previous = previous_chunk ? encode_target_token(g, m, *previous_chunk)
                                    : g.parameter(m.start_token);
  return nn::lstm_step(g, m.target_state, concat({previous, source_state}), state);
}

template <typename T>
Node<T> chunk_nll(Graph<T>& g, const ModelParams<T>& m, Node<T> target_state, std::string_view chunk) {
  const std::vector<int> ids = m.target_vocab.encode(chunk);
  nn::LstmState<T> state = decoder_initial_state(g, m, target_state);
  std::vector<Node<T>> terms;
  terms.reserve(ids.size() + 1);
  int input = CharVocab::kBoundary;
  for (std::size_t t = 0; t <= ids.size(); ++t) {
    const int target = t < ids.size() ? ids[t] : CharVocab::kEndOfToken;
    Node<T> logits = decoder_step(g, m, target_state, input, state);
    terms.push_back(cross_entropy(logits, CharVocab::id_to_output(target)));
    input = target;
  }
  return sum_scalars(std::span<const Node<T>>(terms));
}

template <typename T>
std::vector<Tensor<T>> decoder_distributions(Graph<T>& g, const ModelParams<T>& m,
                                             Node<T> target_state, std::string_view prefix) {
  const std::vector<int> ids = m.target_vocab.encode(prefix);
  nn::LstmState<T> state = decoder_initial_state(g, m, target_state);
  std::vector<Tensor<T>> out;
  int input = CharVocab::kBoundary;
  for (std::size_t t = 0; t <= ids.size(); ++t) {
    out.push_back(softmax(decoder_step(g, m, target_state, input, state)).value());
    if (t < ids.size()) input = ids[t];
  }
  return out;
}

template <typename T>
Node<T> position_scores(Graph<T>& g, const ModelParams<T>& m, Node<T> current_state,
                        const PartialHypothesis& hypothesis, std::span<const Node<T>> target_states) {
  const int count = static_cast<int>(hypothesis.entries.size());
  auto state_of = [&](int entry) {
    const int source = hypothesis.entries[static_cast<std::size_t>(entry)].source_index;
    if (source < 1 || source > static_cast<int>(target_states.size())) {
      throw IndexError("position_scores: entry from source position " + std::to_string(source) +
                       " has no target state");
    }
    return target_states[static_cast<std::size_t>(source - 1)];
  };
  Node<T> boundary = g.parameter(m.boundary_state);
  std::vector<Node<T>> scores;
  scores.reserve(static_cast<std::size_t>(count) + 1);
  for (int slot = 1; slot <= count + 1; ++slot) {
    Node<T> left = slot >= 2 ? state_of(slot - 2) : boundary;
    Node<T> right = slot <= count ? state_of(slot - 1) : boundary;
    scores.push_back(nn::feedforward2(g, m.position, concat({left, right, current_state})));
  }
  return concat(std::span<const Node<T>>(scores));
}

template <typename T>
Node<T> sentence_loss(Graph<T>& g, const ModelParams<T>& m, const align::AlignedSentencePair& pair) {
  const std::size_t n = pair.source_tokens.size();
  if (pair.chunks.size() != n || pair.gold_insertion.size() != n) {
    throw ContractViolation("sentence_loss: chunk or insertion list does not match source length");
  }
  const SourceEncoding<T> enc = encode_source_sentence(g, m, std::span<const std::string>(pair.source_tokens));
  nn::LstmState<T> state = initial_target_state(g, m);
  std::vector<Node<T>> target_states;
  std::vector<Node<T>> terms;
  PartialHypothesis hypothesis;
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::string_view> previous;
    if (i > 0) previous = pair.chunks[i - 1];
    state = target_state_step(g, m, enc.states[i], previous, state);
    target_states.push_back(state.h);
    terms.push_back(chunk_nll(g, m, state.h, pair.chunks[i]));
    if (pair.chunks[i].empty()) continue;
    if (!pair.gold_insertion[i]) throw ContractViolation("sentence_loss: non-empty chunk without a slot");
    const int slot = *pair.gold_insertion[i];
    Node<T> scores = position_scores(g, m, state.h, hypothesis, std::span<const Node<T>>(target_states));
    if (slot < 1 || slot > static_cast<int>(hypothesis.size()) + 1) {
      throw ContractViolation("sentence_loss: gold slot " + std::to_string(slot) + " out of range");
    }
    terms.push_back(cross_entropy(scores, slot - 1));
    hypothesis = apply_insertion(hypothesis, pair.chunks[i], static_cast<int>(i) + 1, slot);
  }
  return sum_scalars(std::span<const Node<T>>(terms));
}

std::size_t output_symbol_count(const align::AlignedSentencePair& pair) {
  std::size_t count = 0;
  for (const std::string& chunk : pair.chunks) {
    count += utf8::length(chunk) + 1;
    if (!chunk.empty()) ++count;
  }
  return count;
}

std::string GoldOracle::chunk(int source_index) {
  return pair_.chunks.at(static_cast<std::size_t>(source_index - 1));
}

int GoldOracle::slot(int source_index, const PartialHypothesis&) {
  const auto& slot = pair_.gold_insertion.at(static_cast<std::size_t>(source_index - 1));
  if (!slot) throw ContractViolation("GoldOracle: no slot for source position " + std::to_string(source_index));
  return *slot;
}

template <typename T>
Translation translate_greedy(const ModelParams<T>& m, std::span<const std::string> source,
                             int max_chunk_chars, DecisionOracle* oracle) {
  if (source.empty()) throw ContractViolation("translate_greedy: empty source sentence");
  if (max_chunk_chars <= 0) throw ContractViolation("translate_greedy: chunk cap must be positive");
  Graph<T> g(&m.params);
  const SourceEncoding<T> enc = encode_source_sentence(g, m, source);
  nn::LstmState<T> state = initial_target_state(g, m);
  std::vector<Node<T>> target_states;
  Translation result;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const int source_index = static_cast<int>(i) + 1;
    std::optional<std::string_view> previous;
    if (i > 0) previous = result.chunks[i - 1];
    state = target_state_step(g, m, enc.states[i], previous, state);
    target_states.push_back(state.h);

    std::string chunk;
    if (oracle) {
      chunk = oracle->chunk(source_index);
    } else {
      nn::LstmState<T> dec = decoder_initial_state(g, m, state.h);
      int input = CharVocab::kBoundary;
      for (int emitted = 0;; ++emitted) {
        ++result.decoder_steps;
        const int out = argmax(decoder_step(g, m, state.h, input, dec).value());
        const int id = CharVocab::output_to_id(out);
        if (id == CharVocab::kEndOfToken || emitted == max_chunk_chars) break;
        chunk += m.target_vocab.render(id);
        input = id;
      }
    }
    result.chunks.push_back(chunk);
    if (chunk.empty()) continue;

    int slot = 1;
    if (oracle) {
      slot = oracle->slot(source_index, result.hypothesis);
    } else {
      const Node<T> scores = position_scores(g, m, state.h, result.hypothesis,
                                             std::span<const Node<T>>(target_states));
      slot = argmax(scores.value()) + 1;
    }
    result.hypothesis = apply_insertion(result.hypothesis, std::move(chunk), source_index, slot);
  }
  result.text = result.hypothesis.text();
  return result;
}

#define INSMT_INSTANTIATE_MODEL(T)                                                                  \
  template ModelParams<T> make_model(const ModelConfig&, CharVocab, CharVocab, std::uint64_t,      \
                                     Initialization);                                               \
  template Node<T> encode_source_token(Graph<T>&, const ModelParams<T>&, std::string_view);        \
  template SourceEncoding<T> encode_source_sentence(Graph<T>&, const ModelParams<T>&,              \
                                                    std::span<const std::string>);                  \
  template Node<T> encode_target_token(Graph<T>&, const ModelParams<T>&, std::string_view);        \
  template nn::LstmState<T> initial_target_state(Graph<T>&, const ModelParams<T>&);                \
  template nn::LstmState<T> target_state_step(Graph<T>&, const ModelParams<T>&, Node<T>,           \
                                              std::optional<std::string_view>,                     \
                                              const nn::LstmState<T>&);                            \
  template Node<T> chunk_nll(Graph<T>&, const ModelParams<T>&, Node<T>, std::string_view);         \
  template std::vector<Tensor<T>> decoder_distributions(Graph<T>&, const ModelParams<T>&, Node<T>, \
                                                        std::string_view);                         \
  template Node<T> position_scores(Graph<T>&, const ModelParams<T>&, Node<T>,                      \
                                   const PartialHypothesis&, std::span<const Node<T>>);            \
  template Node<T> sentence_loss(Graph<T>&, const ModelParams<T>&,                                 \
                                 const align::AlignedSentencePair&);                               \
  template Translation translate_greedy(const ModelParams<T>&, std::span<const std::string>, int,  \
                                        DecisionOracle*);

INSMT_INSTANTIATE_MODEL(float)
INSMT_INSTANTIATE_MODEL(double)
INSMT_INSTANTIATE_MODEL(long double)

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;
template ModelParams<long double> ModelParams<double>::cast<long double>() const;

#undef INSMT_INSTANTIATE_MODEL

}  // namespace insmt
