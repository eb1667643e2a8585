#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

#include "insmt/config.hpp"
#include "insmt/corpus.hpp"
#include "insmt/errors.hpp"
#include "insmt/utf8.hpp"
#include "insmt/vocab.hpp"

using namespace insmt;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("insmt_text_" + std::to_string(::getpid()) + "_" + name);
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST(Utf8, RoundTripsMultibyte) {
  const std::string text = "gr\xC3\xBC\xC3\x9F \xE2\x82\xAC \xF0\x9F\x98\x80";
  const auto decoded = utf8::decode(text);
  ASSERT_TRUE(decoded);
  EXPECT_EQ(decoded->size(), 8u);
  EXPECT_EQ((*decoded)[2], U'ü');
  EXPECT_EQ(utf8::encode(*decoded), text);
  EXPECT_EQ(utf8::length(text), 8u);
}

TEST(Utf8, RejectsMalformedInput) {
  std::size_t offset = 99;
  EXPECT_FALSE(utf8::decode("ab\xC3", &offset));
  EXPECT_EQ(offset, 2u);
  EXPECT_FALSE(utf8::valid("\xC0\xAF"));          // overlong
  EXPECT_FALSE(utf8::valid("\xED\xA0\x80"));      // surrogate
  EXPECT_FALSE(utf8::valid("\xF4\x90\x80\x80"));  // above U+10FFFF
  EXPECT_FALSE(utf8::valid("\x80"));
  EXPECT_THROW(utf8::decode_or_throw("\xFF"), ValidationError);
  EXPECT_TRUE(utf8::valid(""));
}

TEST(Utf8, Lowercase) {
  EXPECT_EQ(utf8::lowercase("Ich KANN"), "ich kann");
  EXPECT_EQ(utf8::lowercase("123 ?!"), "123 ?!");
}

TEST(Vocab, ReservedIdsAndSortedCharacters) {
  const CharVocab v(std::vector<char32_t>{U'c', U'a', U'b', U'a'});
  EXPECT_EQ(v.size(), 8);
  EXPECT_EQ(v.output_size(), 5);
  EXPECT_EQ(v.id(U'a'), CharVocab::kFirstCharacter);
  EXPECT_EQ(v.id(U'c'), CharVocab::kFirstCharacter + 2);
  EXPECT_EQ(v.id(U'z'), CharVocab::kUnknown);
  EXPECT_EQ(v.encode("cab"), (std::vector<int>{7, 5, 6}));
  EXPECT_EQ(v.render(v.id(U'b')), "b");
  EXPECT_EQ(v.render(CharVocab::kUnknown), "\xEF\xBF\xBD");
  EXPECT_EQ(CharVocab::output_to_id(0), CharVocab::kEndOfToken);
  EXPECT_EQ(CharVocab::id_to_output(CharVocab::output_to_id(4)), 4);
}

TEST(Vocab, FromTextsCollectsEveryCodePoint) {
  const std::vector<std::string> texts = {"ab", "b \xC3\xBC"};
  const CharVocab v = CharVocab::from_texts(texts);
  EXPECT_EQ(v.characters(), (std::vector<char32_t>{U' ', U'a', U'b', U'ü'}));
  EXPECT_EQ(v.encode("\xC3\xBC").size(), 1u);
}

TEST(Corpus, TokenizeOnWhitespace) {
  EXPECT_EQ(tokenize("  a\tbb  c \r"), (TokenList{"a", "bb", "c"}));
  EXPECT_TRUE(tokenize(" \t ").empty());
  const TokenList t = {"x", "y"};
  EXPECT_EQ(join(t), "x y");
}

TEST(Corpus, PairsLinesAndDropsEmpty) {
  const std::vector<std::string> src = {"I can", "", "do"};
  const std::vector<std::string> trg = {"Ich kann", "x", " "};
  const Corpus c = corpus_from_lines(src, trg, true);
  ASSERT_EQ(c.pairs.size(), 1u);
  EXPECT_EQ(c.dropped_empty, 2u);
  EXPECT_EQ(c.pairs[0].source, (TokenList{"i", "can"}));
  EXPECT_EQ(c.pairs[0].target, (TokenList{"ich", "kann"}));
  EXPECT_EQ(corpus_from_lines(src, trg, false).pairs[0].source[0], "I");
}

TEST(Corpus, LineCountMismatchNamesBothCounts) {
  const std::vector<std::string> src = {"a", "b", "c"};
  const std::vector<std::string> trg = {"a", "b"};
  try {
    corpus_from_lines(src, trg, false);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find('3'), std::string::npos);
    EXPECT_NE(what.find('2'), std::string::npos);
  }
}

TEST(Corpus, IngestFilesAndRejectBadBytes) {
  const auto s = temp_path("s"), t = temp_path("t");
  write_file(s, "a b\nc\n");
  write_file(t, "x\ny z\n");
  const Corpus c = ingest_corpus(s, t, false);
  ASSERT_EQ(c.pairs.size(), 2u);
  EXPECT_EQ(c.pairs[1].target, (TokenList{"y", "z"}));
  write_file(t, "x\n\xFFz\n");
  try {
    ingest_corpus(s, t, false);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  std::filesystem::remove(s);
  std::filesystem::remove(t);
  EXPECT_THROW(ingest_corpus(s, t, false), IoError);
}

TEST(Corpus, WriteReadLines) {
  const auto p = temp_path("lines");
  const std::vector<std::string> lines = {"one", "", "thr\xC3\xA9"};
  write_lines(p, lines);
  EXPECT_EQ(read_lines(p), lines);
  std::filesystem::remove(p);
}

TEST(Corpus, SplitIsSeededPartitionInCorpusOrder) {
  const SplitIndices a = split_indices(50, 10, 7);
  EXPECT_EQ(a.heldout.size(), 10u);
  EXPECT_EQ(a.train.size(), 40u);
  EXPECT_TRUE(std::is_sorted(a.train.begin(), a.train.end()));
  EXPECT_TRUE(std::is_sorted(a.heldout.begin(), a.heldout.end()));
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.heldout.begin(), a.heldout.end());
  EXPECT_EQ(all.size(), 50u);
  EXPECT_EQ(split_indices(50, 10, 7).heldout, a.heldout);
  EXPECT_NE(split_indices(50, 10, 8).heldout, a.heldout);
  EXPECT_TRUE(split_indices(5, 0, 1).heldout.empty());
  EXPECT_EQ(split_indices(5, 4, 1).train.size(), 1u);
  EXPECT_THROW(split_indices(5, 5, 1), ValidationError);
}

TEST(Corpus, SplitCorpusFollowsIndices) {
  std::vector<int> items(20);
  for (int i = 0; i < 20; ++i) items[i] = 100 + i;
  const auto [train, heldout] = split_corpus<int>(items, 4, 3);
  const SplitIndices idx = split_indices(20, 4, 3);
  for (std::size_t k = 0; k < heldout.size(); ++k) EXPECT_EQ(heldout[k], 100 + static_cast<int>(idx.heldout[k]));
  EXPECT_EQ(train.size(), 16u);
}

TEST(Config, DefaultsValidateAndRoundTrip) {
  const RunConfig defaults;
  EXPECT_NO_THROW(validate(defaults));
  EXPECT_EQ(defaults.hidden_dim, 256);
  EXPECT_EQ(defaults.char_embed_dim, 64);
  EXPECT_EQ(defaults.batch_size, 16);
  EXPECT_DOUBLE_EQ(defaults.tau, 0.1);
  EXPECT_EQ(defaults.patience, 3);
  EXPECT_EQ(parse_run_config(to_text(defaults)), defaults);
  EXPECT_EQ(config_keys().size(), 19u);
}

TEST(Config, ParsesCommentsAndOverrides) {
  const RunConfig c = parse_run_config("# tiny\nhidden_dim = 8\n\nlowercase=false\nlearning_rate=0.5\nseed=42\n");
  EXPECT_EQ(c.hidden_dim, 8);
  EXPECT_FALSE(c.lowercase);
  EXPECT_DOUBLE_EQ(c.learning_rate, 0.5);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(get_config_value(c, "hidden_dim"), "8");
  EXPECT_EQ(c.model_config().hidden_dim, 8);
}

TEST(Config, ErrorsNameTheProblem) {
  try {
    parse_run_config("hidden_dim=4\nbogus=1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config("hidden_dim=four"), ParseError);
  EXPECT_THROW(parse_run_config("novalue"), ParseError);
  RunConfig c;
  EXPECT_THROW(set_config_value(c, "lowercase", "maybe"), ValidationError);
  c.tau = 0.0;
  try {
    validate(c);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("tau"), std::string::npos);
  }
  c = RunConfig{};
  c.beta2 = 1.0;
  EXPECT_THROW(validate(c), ValidationError);
  c = RunConfig{};
  c.max_epochs = 0;
  EXPECT_NO_THROW(validate(c));
  EXPECT_THROW(load_run_config(temp_path("missing.cfg")), IoError);
}
