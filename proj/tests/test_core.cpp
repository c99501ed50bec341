#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hybridrag/core/levenshtein.hpp"
#include "hybridrag/core/sentences.hpp"
#include "hybridrag/core/tokenizer.hpp"
#include "hybridrag/core/types.hpp"
#include "oracles.hpp"

using namespace hybridrag;
using Tokens = std::vector<std::string>;

TEST(Tokenize, EmptyInput) {
    EXPECT_TRUE(tokenize("").empty());
    EXPECT_TRUE(tokenize("   \n\t ").empty());
}

TEST(Tokenize, SplitsPunctuation) { EXPECT_EQ(tokenize("the cat sat.").tokens, (Tokens{"the", "cat", "sat", "."})); }

TEST(Tokenize, KeepsInteriorHyphensAndPeriods) {
    EXPECT_EQ(tokenize("GPT-3.5, yes").tokens, (Tokens{"GPT-3.5", ",", "yes"}));
    EXPECT_EQ(tokenize("don't -x- (a)").tokens, (Tokens{"don't", "-", "x", "-", "(", "a", ")"}));
}

TEST(Tokenize, UnicodeWhitespace) {
    // NBSP, em space, ideographic space
    EXPECT_EQ(tokenize("a\xC2\xA0" "b\xE2\x80\x83" "c\xE3\x80\x80" "d").tokens, (Tokens{"a", "b", "c", "d"}));
    // non-whitespace UTF-8 stays inside the word
    EXPECT_EQ(tokenize("caf\xC3\xA9 ok").tokens, (Tokens{"caf\xC3\xA9", "ok"}));
}

namespace {

std::string random_text(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {"the", "GPT-3.5", "cat", "don't", "1,000", ",", ".", "(", ")",
                                                    "-", "'", "!", "a.b", "x-", "?", ":", "[", "]", "%", "z"};
    static const std::vector<std::string> spaces = {" ", "", "  ", "\n", "\t"};
    std::uniform_int_distribution<std::size_t> n(0, 25), p(0, pieces.size() - 1), s(0, spaces.size() - 1);
    std::string out;
    for (std::size_t i = 0, len = n(rng); i < len; ++i) out += pieces[p(rng)] + spaces[s(rng)];
    return out;
}

std::string strip_ws(const std::string& s) {
    std::string out;
    for (char c : s)
        if (c != ' ' && c != '\n' && c != '\t') out.push_back(c);
    return out;
}

} // namespace

TEST(Tokenize, DetokenizeRoundTripIsIdempotent) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        const auto text = random_text(rng);
        const auto toks = tokenize(text);
        const auto again = tokenize(detokenize(toks));
        ASSERT_EQ(toks.tokens, again.tokens) << "text: [" << text << "] detok: [" << detokenize(toks) << "]";
        ASSERT_EQ(strip_ws(detokenize(toks)), strip_ws(text));
    }
}

TEST(Levenshtein, Examples) {
    EXPECT_EQ(levenshtein(tokenize("a b c"), tokenize("a b c")), 0u);
    EXPECT_EQ(levenshtein(Tokens{"a"}, Tokens{}), 1u);
    EXPECT_EQ(levenshtein(Tokens{"the", "cat", "sat"}, Tokens{"the", "dog", "sat", "down"}), 2u);
    EXPECT_EQ(oracle::edit_distance_table({"the", "cat", "sat"}, {"the", "dog", "sat", "down"}), 2u);
}

TEST(Levenshtein, MatchesDpTableOnRandomPairs) {
    std::mt19937_64 rng(11);
    const oracle::Seq alphabet{"a", "b", "c", "d"};
    for (int i = 0; i < 3000; ++i) {
        const auto a = oracle::random_seq(rng, alphabet, 30);
        const auto b = oracle::random_seq(rng, alphabet, 30);
        ASSERT_EQ(levenshtein(a, b), oracle::edit_distance_table(a, b));
        ASSERT_EQ(levenshtein(a, b), levenshtein(b, a));
        ASSERT_EQ(levenshtein(a, b) == 0, a == b);
    }
}

TEST(Levenshtein, AppendingRaisesDistanceByCount) {
    std::mt19937_64 rng(5);
    const oracle::Seq alphabet{"x", "y", "z"};
    for (int i = 0; i < 500; ++i) {
        const auto a = oracle::random_seq(rng, alphabet, 30);
        const auto extra = oracle::random_seq(rng, alphabet, 12);
        auto b = a;
        b.insert(b.end(), extra.begin(), extra.end());
        ASSERT_EQ(levenshtein(a, b), extra.size());
    }
}

TEST(Levenshtein, TriangleInequality) {
    std::mt19937_64 rng(3);
    const oracle::Seq alphabet{"p", "q", "r", "s"};
    for (int i = 0; i < 1000; ++i) {
        const auto a = oracle::random_seq(rng, alphabet, 30);
        const auto b = oracle::random_seq(rng, alphabet, 30);
        const auto c = oracle::random_seq(rng, alphabet, 30);
        ASSERT_LE(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c));
    }
}

TEST(Sentences, SplitsOnTerminalPunctuationFollowedBySpace) {
    EXPECT_EQ(split_sentences("One. Two! Three? GPT-3.5 is here"),
              (Tokens{"One.", "Two!", "Three?", "GPT-3.5 is here"}));
    EXPECT_TRUE(split_sentences("").empty());
}

TEST(MemoryFifo, EvictsOldestFirst) {
    Memory m(3);
    for (RequestSeq s = 1; s <= 4; ++s) m.push({{"m" + std::to_string(s)}, s, Millis{0}});
    ASSERT_EQ(m.size(), 3u);
    EXPECT_EQ(m.entries().front().source_request_seq, 2u);
    EXPECT_EQ(m.entries().back().source_request_seq, 4u);
    EXPECT_THROW(m.push({{"old"}, 3, Millis{0}}), InvalidArgument);
    EXPECT_THROW(Memory(0), InvalidArgument);
}

TEST(EngineConfigTest, ValidatesBounds) {
    EngineConfig c;
    EXPECT_NO_THROW(c.validate());
    c.k = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.chunk_tokens = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}
