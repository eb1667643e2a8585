#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "insmt/checkpoint.hpp"
#include "insmt/errors.hpp"
#include "insmt/grad_check.hpp"
#include "insmt/model.hpp"
#include "insmt/utf8.hpp"

using namespace insmt;

namespace {

ModelConfig tiny_config(int hidden = 3, int embed = 2) {
  ModelConfig c;
  c.hidden_dim = hidden;
  c.char_embed_dim = embed;
  c.max_chunk_chars = 6;
  c.init_scale = 0.5;
  return c;
}

CharVocab vocab(std::u32string chars) { return CharVocab(std::vector<char32_t>(chars.begin(), chars.end())); }

template <typename T>
ModelParams<T> random_model(std::uint64_t seed, int hidden = 3) {
  return make_model<T>(tiny_config(hidden), vocab(U"abcdeghiklnortu"), vocab(U"abcdhiknstuz "), seed);
}

ModelParams<double> zero_model() {
  return make_model<double>(tiny_config(), vocab(U"abc"), vocab(U"xyz "), 1, Initialization::kZero);
}

align::AlignedSentencePair pair_from(std::vector<std::string> src, std::vector<std::string> chunks,
                                     std::vector<std::optional<int>> index) {
  align::AlignedSentencePair p;
  p.source_tokens = std::move(src);
  p.chunks = std::move(chunks);
  p.gold_target_index = std::move(index);
  p.gold_insertion = align::derive_gold_insertions(p.gold_target_index);
  return p;
}

align::AlignedSentencePair german_pair() {
  return pair_from({"i", "can", "not", "do", "that"}, {"ich", "kann", "nicht", "tun", "das"}, {1, 2, 4, 5, 3});
}

template <typename T>
Node<T> embed_char(Graph<T>& g, int table, int id) { return embedding_lookup(g.parameter(table), id); }

void expect_near(const Tensor<double>& a, const Tensor<double>& b, double tol = 1e-12) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], tol);
}

}  // namespace

TEST(Model, ParameterShapesFollowConfig) {
  const auto m = random_model<double>(1, 4);
  const int H = 4, E = 2;
  EXPECT_EQ(m.params[m.source_embeddings].value.shape(), (Shape{m.source_vocab.size(), E}));
  EXPECT_EQ(m.params[m.source_sentence_fwd.input_weights].value.shape(), (Shape{4 * H, 2 * H}));
  EXPECT_EQ(m.params[m.target_state.input_weights].value.shape(), (Shape{4 * H, 4 * H}));
  EXPECT_EQ(m.params[m.decoder.input_weights].value.shape(), (Shape{4 * H, E + H}));
  EXPECT_EQ(m.params[m.output_weights].value.shape(), (Shape{m.target_vocab.output_size(), H}));
  EXPECT_EQ(m.params[m.position.w1].value.shape(), (Shape{H, 3 * H}));
  EXPECT_EQ(m.params[m.boundary_state].value.shape(), (Shape{H}));
  EXPECT_EQ(m.params[m.start_token].value.shape(), (Shape{2 * H}));
}

TEST(Model, DefaultDimensions) {
  const auto m = make_model<float>(ModelConfig{}, vocab(U"ab"), vocab(U"cd"), 1, Initialization::kZero);
  EXPECT_EQ(m.params[m.source_embeddings].value.dim(1), 64);
  EXPECT_EQ(m.params[m.source_token_fwd.recurrent_weights].value.shape(), (Shape{1024, 256}));
}

TEST(Model, InitializationIsReproducible) {
  EXPECT_EQ(random_model<float>(7).params, random_model<float>(7).params);
  EXPECT_FALSE(random_model<float>(7).params == random_model<float>(8).params);
}

TEST(Model, EveryParameterIsReachableFromTheLoss) {
  const auto m = random_model<double>(3);
  const auto pair = pair_from({"tat", "du", "ka"}, {"kann", "", "du ist"}, {2, std::nullopt, 1});
  Graph<double> g(&m.params);
  g.backward(sentence_loss(g, m, pair));
  Gradients<double> grads = zero_gradients(m.params);
  g.accumulate_parameter_grads(grads);
  for (std::size_t p = 0; p < grads.size(); ++p) {
    // A shared offset on every slot score cancels in the softmax.
    if (m.params[static_cast<int>(p)].name == "position.b2") continue;
    double norm = 0.0;
    for (double v : grads[p].values()) norm += v * v;
    EXPECT_GT(norm, 0.0) << m.params[static_cast<int>(p)].name;
  }
}

TEST(SourceEncoding, TokenVectorShapeAndPurity) {
  const auto m = random_model<double>(2);
  Graph<double> g(&m.params);
  for (const char* token : {"a", "tic", "unknownx"}) {
    EXPECT_EQ(encode_source_token(g, m, token).shape(), (Shape{6}));
  }
  EXPECT_EQ(encode_source_token(g, m, "tic").value(), encode_source_token(g, m, "tic").value());
}

TEST(SourceEncoding, SingleCharacterMatchesLstmSteps) {
  const auto m = random_model<double>(2);
  Graph<double> g(&m.params);
  auto x = embed_char(g, m.source_embeddings, m.source_vocab.id(U'k'));
  auto f = nn::lstm_step(g, m.source_token_fwd, x, nn::zero_state(g, m.source_token_fwd));
  auto b = nn::lstm_step(g, m.source_token_bwd, x, nn::zero_state(g, m.source_token_bwd));
  expect_near(encode_source_token(g, m, "k").value(), concat({f.h, b.h}).value());
}

TEST(SourceEncoding, SentenceMatchesTwoLevelUnroll) {
  const auto m = random_model<double>(4);
  const std::vector<std::string> tokens = {"ab", "c", "dea"};
  Graph<double> g(&m.params);
  const auto enc = encode_source_sentence(g, m, tokens);
  ASSERT_EQ(enc.states.size(), 3u);
  std::vector<Node<double>> vectors;
  for (const auto& t : tokens) {
    std::vector<Node<double>> chars;
    for (int id : m.source_vocab.encode(t)) chars.push_back(embed_char(g, m.source_embeddings, id));
    auto fs = nn::zero_state(g, m.source_token_fwd);
    for (auto& c : chars) fs = nn::lstm_step(g, m.source_token_fwd, c, fs);
    auto bs = nn::zero_state(g, m.source_token_bwd);
    for (auto it = chars.rbegin(); it != chars.rend(); ++it) bs = nn::lstm_step(g, m.source_token_bwd, *it, bs);
    vectors.push_back(concat({fs.h, bs.h}));
  }
  std::vector<Node<double>> fwd(3), bwd(3);
  auto fs = nn::zero_state(g, m.source_sentence_fwd);
  for (int t = 0; t < 3; ++t) fwd[t] = (fs = nn::lstm_step(g, m.source_sentence_fwd, vectors[t], fs)).h;
  auto bs = nn::zero_state(g, m.source_sentence_bwd);
  for (int t = 2; t >= 0; --t) bwd[t] = (bs = nn::lstm_step(g, m.source_sentence_bwd, vectors[t], bs)).h;
  for (int t = 0; t < 3; ++t) {
    expect_near(enc.token_vectors[t].value(), vectors[t].value());
    expect_near(enc.states[t].value(), concat({fwd[t], bwd[t]}).value());
  }
}

TEST(SourceEncoding, EmptySentenceIsContractViolation) {
  const auto m = random_model<double>(4);
  Graph<double> g(&m.params);
  EXPECT_THROW(encode_source_sentence(g, m, std::vector<std::string>{}), ContractViolation);
}

TEST(TargetEncoding, EmptyChunkUsesReservedSymbol) {
  const auto m = random_model<double>(5);
  Graph<double> g(&m.params);
  auto x = embed_char(g, m.target_embeddings, CharVocab::kEmpty);
  auto f = nn::lstm_step(g, m.target_token_fwd, x, nn::zero_state(g, m.target_token_fwd));
  auto b = nn::lstm_step(g, m.target_token_bwd, x, nn::zero_state(g, m.target_token_bwd));
  expect_near(encode_target_token(g, m, "").value(), concat({f.h, b.h}).value());
  EXPECT_EQ(encode_target_token(g, m, "").value(), encode_target_token(g, m, "").value());
}

TEST(TargetEncoding, SpaceIsAnOrdinaryCharacter) {
  const auto m = random_model<double>(5);
  EXPECT_EQ(m.target_vocab.encode("k z").size(), 3u);
  Graph<double> g(&m.params);
  std::vector<Node<double>> chars;
  for (char32_t c : {U'k', U' ', U'z'}) chars.push_back(embed_char(g, m.target_embeddings, m.target_vocab.id(c)));
  expect_near(encode_target_token(g, m, "k z").value(),
              nn::final_state<double>(g, m.target_token_fwd, m.target_token_bwd, chars).value());
}

TEST(TargetEncoding, TwoCharacterManualUnroll) {
  const auto m = random_model<double>(6);
  Graph<double> g(&m.params);
  auto a = embed_char(g, m.target_embeddings, m.target_vocab.id(U'a'));
  auto b = embed_char(g, m.target_embeddings, m.target_vocab.id(U'b'));
  auto f = nn::lstm_step(g, m.target_token_fwd, a, nn::zero_state(g, m.target_token_fwd));
  f = nn::lstm_step(g, m.target_token_fwd, b, f);
  auto r = nn::lstm_step(g, m.target_token_bwd, b, nn::zero_state(g, m.target_token_bwd));
  r = nn::lstm_step(g, m.target_token_bwd, a, r);
  expect_near(encode_target_token(g, m, "ab").value(), concat({f.h, r.h}).value());
}

TEST(TargetState, FirstStepUsesStartVectorThenChunks) {
  const auto m = random_model<double>(7);
  Graph<double> g(&m.params);
  const auto enc = encode_source_sentence(g, m, std::vector<std::string>{"ab", "cd"});
  auto s1 = target_state_step(g, m, enc.states[0], std::nullopt, initial_target_state(g, m));
  EXPECT_EQ(s1.h.shape(), (Shape{3}));
  auto manual1 = nn::lstm_step(g, m.target_state, concat({g.parameter(m.start_token), enc.states[0]}),
                               nn::zero_state(g, m.target_state));
  expect_near(s1.h.value(), manual1.h.value());
  auto s2 = target_state_step(g, m, enc.states[1], std::optional<std::string_view>("du"), s1);
  auto manual2 = nn::lstm_step(g, m.target_state, concat({encode_target_token(g, m, "du"), enc.states[1]}), manual1);
  expect_near(s2.h.value(), manual2.h.value());
  expect_near(s2.c.value(), manual2.c.value());
}

TEST(ChunkProbability, UniformModel) {
  const auto m = zero_model();
  const double v = m.target_vocab.output_size();
  Graph<double> g(&m.params);
  auto h = g.input(Tensor<double>(Shape{3}));
  EXPECT_NEAR(chunk_log_prob(g, m, h, "").value()[0], -std::log(v), 1e-12);
  for (const char* chunk : {"x", "xy", "z yx"}) {
    const double len = std::string(chunk).size();
    EXPECT_NEAR(chunk_log_prob(g, m, h, chunk).value()[0], -(len + 1) * std::log(v), 1e-12);
  }
}

TEST(ChunkProbability, EnumerationSumsToOneWithCapRemainder) {
  // Target characters {a, b}; 'q' maps to the unknown symbol, so the
  // enumerated alphabet covers every non-terminal decoder output.
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto m = make_model<double>(tiny_config(), vocab(U"ab"), vocab(U"ab"), seed);
    Graph<double> g(&m.params);
    auto h = g.input(Tensor<double>::vector({0.3, -0.5, 0.8}));
    const std::string alphabet = "abq";
    std::vector<std::string> chunks = {""};
    std::vector<std::string> frontier = {""};
    for (int len = 1; len <= 2; ++len) {
      std::vector<std::string> next;
      for (const auto& prefix : frontier) {
        for (char c : alphabet) next.push_back(prefix + c);
      }
      chunks.insert(chunks.end(), next.begin(), next.end());
      frontier = next;
    }
    double mass = 0.0;
    for (const auto& chunk : chunks) mass += std::exp(chunk_log_prob(g, m, h, chunk).value()[0]);
    EXPECT_LT(mass, 1.0);
    // Mass of continuing past length 2: P(prefix) * (1 - P(end | prefix)).
    double remainder = 0.0;
    for (const auto& prefix : frontier) {
      const auto dists = decoder_distributions(g, m, h, prefix);
      double p = 1.0;
      const auto ids = m.target_vocab.encode(prefix);
      for (std::size_t t = 0; t < ids.size(); ++t) p *= dists[t][CharVocab::id_to_output(ids[t])];
      remainder += p * (1.0 - dists.back()[CharVocab::id_to_output(CharVocab::kEndOfToken)]);
    }
    EXPECT_NEAR(mass + remainder, 1.0, 1e-6);
  }
}

TEST(Position, SingleSlotWhenHypothesisEmpty) {
  const auto m = random_model<double>(8);
  Graph<double> g(&m.params);
  auto h = g.input(Tensor<double>::vector({0.1, 0.2, 0.3}));
  std::vector<Node<double>> states = {h};
  const auto p = position_distribution(g, m, h, PartialHypothesis{}, std::span<const Node<double>>(states)).value();
  ASSERT_EQ(p.size(), 1u);
  EXPECT_DOUBLE_EQ(p[0], 1.0);
}

TEST(Position, ZeroNetworkIsUniformAndRandomSumsToOne) {
  const auto zero = zero_model();
  const auto rnd = random_model<double>(9);
  PartialHypothesis hyp;
  for (int k = 1; k <= 4; ++k) hyp = apply_insertion(hyp, "w" + std::to_string(k), k, k % 2 ? 1 : k);
  for (const auto* m : {&zero, &rnd}) {
    Graph<double> g(&m->params);
    std::vector<Node<double>> states;
    for (int k = 0; k < 5; ++k) states.push_back(g.input(Tensor<double>::vector({0.1 * k, -0.2, 0.3 + k})));
    const auto p = position_distribution(g, *m, states.back(), hyp, std::span<const Node<double>>(states)).value();
    ASSERT_EQ(p.size(), 5u);
    double total = 0.0;
    for (double v : p.values()) {
      total += v;
      if (m == &zero) EXPECT_NEAR(v, 0.2, 1e-15);
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Position, GermanExampleDasStepHasFiveSlots) {
  const auto pair = german_pair();
  PartialHypothesis hyp;
  for (int i = 0; i < 4; ++i) hyp = apply_insertion(hyp, pair.chunks[i], i + 1, *pair.gold_insertion[i]);
  EXPECT_EQ(hyp.text(), "ich kann nicht tun");
  EXPECT_EQ(*pair.gold_insertion[4], 3);
  const auto m = random_model<double>(10);
  Graph<double> g(&m.params);
  std::vector<Node<double>> states;
  for (int k = 0; k < 5; ++k) states.push_back(g.input(Tensor<double>::vector({0.1 * k, 0.2, -0.3})));
  EXPECT_EQ(position_scores(g, m, states[4], hyp, std::span<const Node<double>>(states)).shape(), (Shape{5}));
}

TEST(SentenceLoss, UniformModelAnalytic) {
  const auto m = zero_model();
  const auto pair = pair_from({"a", "b", "c"}, {"y", "", "x z"}, {2, std::nullopt, 1});
  Graph<double> g(&m.params);
  const double v = m.target_vocab.output_size();
  const double expected = (2 + 1 + 4) * std::log(v) + std::log(1.0) + std::log(2.0);
  EXPECT_NEAR(sentence_loss(g, m, pair).value()[0], expected, 1e-12);
  EXPECT_EQ(output_symbol_count(pair), 2u + 1u + 4u + 2u);
}

TEST(SentenceLoss, NonNegativeAndGradChecked) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto m = make_model<double>(tiny_config(2, 2), vocab(U"abc"), vocab(U"xy "), seed);
    auto extended = m.cast<long double>();
    const auto pair = pair_from({"ab", "c"}, {"y x", "x"}, {2, 1});
    Graph<double> g(&m.params);
    EXPECT_GE(sentence_loss(g, m, pair).value()[0], 0.0);
    const auto report = grad_check_parameters(
        [&](Graph<double>& gg) { return sentence_loss(gg, m, pair); }, m.params,
        [&](Graph<long double>& gg) { return sentence_loss(gg, extended, pair); }, extended.params);
    EXPECT_LT(report.max_relative_error, 1e-4) << report.worst_parameter;
  }
}

TEST(Hypothesis, InsertionRules) {
  PartialHypothesis h = apply_insertion({}, "a", 1, 1);
  EXPECT_EQ(h.size(), 1u);
  h = apply_insertion(h, "b", 2, 2);
  EXPECT_EQ(h.text(), "a b");
  h = apply_insertion(h, "c", 3, 1);
  EXPECT_EQ(h.text(), "c a b");
  EXPECT_THROW(apply_insertion(h, "d", 4, 5), ContractViolation);
  EXPECT_THROW(apply_insertion(h, "d", 4, 0), ContractViolation);
  EXPECT_THROW(apply_insertion(h, "", 4, 1), ContractViolation);
  EXPECT_EQ(replay_history(h), h);
}

TEST(Hypothesis, GermanExampleInsertion) {
  PartialHypothesis h;
  int i = 1;
  for (const char* w : {"ich", "kann", "nicht", "tun"}) {
    h = apply_insertion(h, w, i, i);
    ++i;
  }
  h = apply_insertion(h, "das", 5, 3);
  EXPECT_EQ(h.text(), "ich kann das nicht tun");
  EXPECT_EQ(h.history.back(), std::make_pair(5, 3));
}

TEST(Translate, GoldOracleReplaysGermanExample) {
  const auto m = random_model<float>(11);
  const auto pair = german_pair();
  GoldOracle oracle(pair);
  const auto t = translate_greedy(m, pair.source_tokens, 32, &oracle);
  EXPECT_EQ(t.text, "ich kann das nicht tun");
  EXPECT_EQ(replay_history(t.hypothesis), t.hypothesis);
}

TEST(Translate, TerminatesWithinCapAndIsDeterministic) {
  auto m = random_model<float>(12);
  // Suppress end-of-token so every chunk runs to the cap.
  m.params[m.output_bias].value[CharVocab::id_to_output(CharVocab::kEndOfToken)] = -100.f;
  const std::vector<std::string> src = {"ab", "cd", "e"};
  const auto t = translate_greedy(m, src, 4);
  EXPECT_EQ(t.decoder_steps, src.size() * 5);
  for (const auto& chunk : t.chunks) EXPECT_EQ(utf8::length(chunk), 4u);
  EXPECT_EQ(t.text, translate_greedy(m, src, 4).text);
}

TEST(Translate, AllEmptyChunksGiveEmptyOutput) {
  auto m = random_model<float>(13);
  m.params[m.output_bias].value[CharVocab::id_to_output(CharVocab::kEndOfToken)] = 100.f;
  const auto t = translate_greedy(m, std::vector<std::string>{"ab", "c"}, 8);
  EXPECT_EQ(t.text, "");
  EXPECT_EQ(t.hypothesis.size(), 0u);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto m = random_model<float>(14);
  const std::string bytes = serialize_checkpoint(m, {{"batch_size", "16"}});
  const Checkpoint loaded = deserialize_checkpoint(bytes);
  EXPECT_EQ(loaded.model.params, m.params);
  EXPECT_EQ(loaded.model.source_vocab, m.source_vocab);
  EXPECT_EQ(loaded.model.target_vocab, m.target_vocab);
  EXPECT_EQ(loaded.model.config, m.config);
  EXPECT_EQ(loaded.config.at("batch_size"), "16");
  EXPECT_EQ(serialize_checkpoint(loaded.model, loaded.config), bytes);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto m = random_model<float>(15);
  const auto path = std::filesystem::temp_directory_path() / ("insmt_ckpt_" + std::to_string(::getpid()));
  save_checkpoint(path, m);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.model.params, m.params);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, CorruptInputIsIoError) {
  const std::string bytes = serialize_checkpoint(random_model<float>(16));
  EXPECT_THROW(deserialize_checkpoint("NOTACKPT" + bytes.substr(8)), IoError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
  EXPECT_THROW(deserialize_checkpoint(""), IoError);
}
