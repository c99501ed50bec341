#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hybridrag/retriever.hpp"
#include "oracles.hpp"

using namespace hybridrag;

namespace {

std::string words(std::size_t n, const std::string& stem = "w") {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + stem + std::to_string(i);
    return out;
}

} // namespace

TEST(ChunkDocument, PacksIntoFixedWindows) {
    const auto chunks = chunk_document("d", words(300), 128);
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[0].token_count, 128u);
    EXPECT_EQ(chunks[1].token_count, 128u);
    EXPECT_EQ(chunks[2].token_count, 44u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(chunks[i].chunk_index, i);
        EXPECT_EQ(count_tokens(chunks[i].text), chunks[i].token_count);
    }
}

TEST(ChunkDocument, EdgeCases) {
    EXPECT_TRUE(chunk_document("d", "", 128).empty());
    EXPECT_EQ(chunk_document("d", words(128), 128).size(), 1u);
    EXPECT_THROW(chunk_document("d", "x", 0), InvalidArgument);
}

TEST(Embedder, DeterministicUnitVectors) {
    HashedBagEmbedder e;
    EXPECT_EQ(e.id(), "hashed-bow-v1-256");
    const auto a = e.embed("The pier was built");
    EXPECT_EQ(a, e.embed("The pier was built"));
    double norm = 0;
    for (double x : a) norm += x * x;
    EXPECT_NEAR(norm, 1.0, 1e-12);
    const auto z = e.embed("");
    EXPECT_EQ(z[0], 1.0);
}

TEST(Ingest, CountsAndErrors) {
    HashedBagEmbedder e;
    const auto idx = ingest({{"a", words(128)}, {"b", words(128, "v")}}, e);
    EXPECT_EQ(idx.size(), 2u);
    EXPECT_THROW(ingest({{"a", "x"}, {"a", "y"}}, e), InvalidArgument);

    const auto empty = ingest({}, e);
    EXPECT_TRUE(empty.empty());
    EXPECT_THROW(retrieve(empty, e, "query", 3), IndexError);
    EXPECT_THROW(retrieve(idx, e, "   ", 3), InvalidArgument);
}

TEST(Ingest, SerializationIsByteIdentical) {
    HashedBagEmbedder e;
    const std::vector<Document> docs{{"a", words(300)}, {"b", "Short text, with punctuation."}};
    EXPECT_EQ(ingest(docs, e).serialize(), ingest(docs, e).serialize());
}

TEST(Ingest, SaveLoadRoundTripAndEmbedderCheck) {
    HashedBagEmbedder e;
    const auto idx = ingest({{"a", words(300)}}, e);
    const auto path = (std::filesystem::temp_directory_path() / "hybridrag_index_test.json").string();
    idx.save(path);
    const auto back = CorpusIndex::load(path, e.id());
    EXPECT_EQ(back.serialize(), idx.serialize());
    EXPECT_THROW(CorpusIndex::load(path, "other-embedder"), IndexError);
    HashedBagEmbedder narrow(64);
    EXPECT_THROW(retrieve(back, narrow, "w1", 1), IndexError);
    std::remove(path.c_str());
}

TEST(Retrieve, SelfSimilarityRanksFirst) {
    HashedBagEmbedder e;
    const auto idx = ingest({{"a", words(300)}, {"b", words(200, "v")}}, e);
    const auto& target = idx.chunks()[3];
    const auto hits = idx.search(e, target.text, 3);
    ASSERT_FALSE(hits.empty());
    EXPECT_EQ(hits[0].chunk, &target);
    EXPECT_NEAR(hits[0].score, 1.0, 1e-12);
}

TEST(Retrieve, TruncatesToIndexSize) {
    HashedBagEmbedder e;
    const auto idx = ingest({{"a", "alpha beta"}, {"b", "gamma delta"}}, e);
    EXPECT_EQ(retrieve(idx, e, "alpha", 3).size(), 2u);
}

TEST(Retrieve, MoreSharedTokensRanksHigher) {
    HashedBagEmbedder e;
    std::vector<Document> docs{{"A", "pier toll storm gull"}, {"B", "pier harbor crane mast"}};
    for (int i = 0; i < 8; ++i) docs.push_back({"filler" + std::to_string(i), words(4, "f" + std::to_string(i) + "_")});
    const auto idx = ingest(docs, e);
    ASSERT_EQ(idx.size(), 10u);
    const std::string query = "pier toll storm quay";

    // independent scorer over all 10 chunks
    const auto q = e.embed(query);
    std::vector<std::pair<double, std::string>> brute;
    for (const auto& c : idx.chunks()) brute.emplace_back(-oracle::cosine(q, e.embed(c.text)), c.doc_id);
    std::sort(brute.begin(), brute.end());
    const auto pos = [&](const std::string& id) {
        return std::find_if(brute.begin(), brute.end(), [&](auto& p) { return p.second == id; }) - brute.begin();
    };
    EXPECT_LT(pos("A"), pos("B"));

    const auto got = retrieve(idx, e, query, 10);
    const auto got_pos = [&](const std::string& id) {
        return std::find_if(got.begin(), got.end(), [&](auto& c) { return c.doc_id == id; }) - got.begin();
    };
    EXPECT_EQ(got.front().doc_id, "A");
    EXPECT_LT(got_pos("A"), got_pos("B"));
}

TEST(Retrieve, TiesBreakByDocIdThenChunkIndex) {
    HashedBagEmbedder e;
    const auto idx = ingest({{"z", "same words"}, {"a", "same words"}, {"m", "same words"}}, e);
    const auto got = retrieve(idx, e, "same words", 3);
    ASSERT_EQ(got.size(), 3u);
    EXPECT_EQ(got[0].doc_id, "a");
    EXPECT_EQ(got[1].doc_id, "m");
    EXPECT_EQ(got[2].doc_id, "z");
}

TEST(Corpus, FixtureHasThirtyChunks) {
    HashedBagEmbedder e;
    const auto docs = read_corpus_jsonl(std::string(HYBRIDRAG_FIXTURE_DIR) + "/corpus.jsonl");
    EXPECT_EQ(docs.size(), 10u);
    EXPECT_EQ(ingest(docs, e, 128).size(), 30u);
}

TEST(Corpus, RejectsMalformedLines) {
    std::istringstream bad("{\"doc_id\": \"a\"}\n");
    EXPECT_THROW(read_corpus_jsonl(bad), InvalidArgument);
}
