#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hybridrag/core/errors.hpp"
#include "hybridrag/core/tokenizer.hpp"

namespace hybridrag {

using Embedding = std::vector<double>;

struct Chunk {
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string text;
    std::size_t token_count = 0;
    Embedding embedding;
};

/// Text encoder producing unit vectors. Implementations must be
/// deterministic and safe to call concurrently.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual Embedding embed(std::string_view text) const = 0;
};

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// L2-normalizes in place; the zero vector becomes the first basis vector.
inline void normalize(Embedding& v) {
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        if (!v.empty()) v[0] = 1.0;
        return;
    }
    for (double& x : v) x /= norm;
}

/// Hashed bag-of-tokens: each lowercased token adds +/-1 to one bucket.
class HashedBagEmbedder final : public Embedder {
public:
    explicit HashedBagEmbedder(std::size_t dimension = 256) : dim_(dimension) {
        if (dim_ == 0) throw InvalidArgument("embedding dimension must be >= 1");
    }

    std::string id() const override { return "hashed-bow-v1-" + std::to_string(dim_); }
    std::size_t dimension() const override { return dim_; }

    Embedding embed(std::string_view text) const override {
        Embedding v(dim_, 0.0);
        for (auto tok : tokenize(text).tokens) {
            for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            const auto bucket = fnv1a64(tok) % dim_;
            const double sign = (fnv1a64(tok, 0x84222325cbf29ce4ULL) & 1U) ? 1.0 : -1.0;
            v[bucket] += sign;
        }
        normalize(v);
        return v;
    }

private:
    std::size_t dim_;
};

/// Dot product of two unit vectors, accumulated in index order.
inline double cosine(const Embedding& a, const Embedding& b) {
    double s = 0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

/// Greedy left-to-right packing into windows of at most `chunk_tokens`.
/// Embeddings are left empty.
inline std::vector<Chunk> chunk_document(const std::string& doc_id, std::string_view text, std::size_t chunk_tokens) {
    if (chunk_tokens < 1) throw InvalidArgument("chunk_tokens must be >= 1");
    const TokenSeq seq = tokenize(text);
    std::vector<Chunk> out;
    std::span<const std::string> all(seq.tokens);
    for (std::size_t start = 0; start < all.size(); start += chunk_tokens) {
        auto window = all.subspan(start, std::min(chunk_tokens, all.size() - start));
        out.push_back(Chunk{doc_id, out.size(), detokenize(window), window.size(), {}});
    }
    return out;
}

struct Document {
    std::string doc_id;
    std::string text;
};

struct ScoredChunk {
    const Chunk* chunk;
    double score;
};

/// Immutable searchable corpus. Exact scan; safe for concurrent retrieve.
class CorpusIndex {
public:
    static constexpr int kFormatVersion = 1;

    CorpusIndex() = default;
    CorpusIndex(std::string embedder_id, std::size_t dimension, std::size_t chunk_tokens, std::vector<Chunk> chunks)
        : embedder_id_(std::move(embedder_id)), dimension_(dimension), chunk_tokens_(chunk_tokens),
          chunks_(std::move(chunks)) {
        for (const auto& c : chunks_)
            if (c.embedding.size() != dimension_)
                throw IndexError("chunk " + c.doc_id + "#" + std::to_string(c.chunk_index) +
                                 " has embedding width " + std::to_string(c.embedding.size()));
    }

    const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
    const std::string& embedder_id() const noexcept { return embedder_id_; }
    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t chunk_tokens() const noexcept { return chunk_tokens_; }
    std::size_t size() const noexcept { return chunks_.size(); }
    bool empty() const noexcept { return chunks_.empty(); }

    /// Top-k chunks by cosine similarity; ties by (doc_id, chunk_index).
    std::vector<ScoredChunk> search(const Embedder& embedder, std::string_view query, std::size_t k) const {
        if (chunks_.empty()) throw IndexError("retrieve on an empty index");
        if (k < 1) throw InvalidArgument("k must be >= 1");
        if (trim(query).empty()) throw InvalidArgument("retrieve with an empty query");
        if (embedder.id() != embedder_id_)
            throw IndexError("query embedder '" + embedder.id() + "' does not match index embedder '" +
                             embedder_id_ + "'");
        const Embedding q = embedder.embed(query);
        std::vector<ScoredChunk> scored;
        scored.reserve(chunks_.size());
        for (const auto& c : chunks_) scored.push_back({&c, cosine(q, c.embedding)});
        const std::size_t n = std::min(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                          [](const ScoredChunk& a, const ScoredChunk& b) {
                              if (a.score != b.score) return a.score > b.score;
                              if (a.chunk->doc_id != b.chunk->doc_id) return a.chunk->doc_id < b.chunk->doc_id;
                              return a.chunk->chunk_index < b.chunk->chunk_index;
                          });
        scored.resize(n);
        return scored;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "hybridrag-index";
        j["version"] = kFormatVersion;
        j["embedder_id"] = embedder_id_;
        j["dimension"] = dimension_;
        j["chunk_tokens"] = chunk_tokens_;
        auto& arr = j["chunks"] = nlohmann::json::array();
        for (const auto& c : chunks_)
            arr.push_back({{"doc_id", c.doc_id},
                           {"chunk_index", c.chunk_index},
                           {"text", c.text},
                           {"token_count", c.token_count},
                           {"embedding", c.embedding}});
        return j;
    }

    std::string serialize() const { return to_json().dump(); }

    /// Loads a persisted index; the expected embedder must match.
    static CorpusIndex from_json(const nlohmann::json& j, const std::string& expected_embedder_id) {
        if (j.value("format", "") != "hybridrag-index") throw IndexError("not a hybridrag index file");
        if (j.value("version", 0) != kFormatVersion)
            throw IndexError("unsupported index version " + std::to_string(j.value("version", 0)));
        const auto embedder_id = j.at("embedder_id").get<std::string>();
        if (embedder_id != expected_embedder_id)
            throw IndexError("index was built with embedder '" + embedder_id + "', expected '" +
                             expected_embedder_id + "'");
        std::vector<Chunk> chunks;
        for (const auto& c : j.at("chunks"))
            chunks.push_back(Chunk{c.at("doc_id").get<std::string>(), c.at("chunk_index").get<std::size_t>(),
                                   c.at("text").get<std::string>(), c.at("token_count").get<std::size_t>(),
                                   c.at("embedding").get<Embedding>()});
        return CorpusIndex(embedder_id, j.at("dimension").get<std::size_t>(), j.at("chunk_tokens").get<std::size_t>(),
                           std::move(chunks));
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IndexError("cannot write index to " + path);
        out << serialize();
    }

    static CorpusIndex load(const std::string& path, const std::string& expected_embedder_id) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IndexError("cannot read index from " + path);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw IndexError(std::string("malformed index file: ") + e.what());
        }
        return from_json(j, expected_embedder_id);
    }

private:
    std::string embedder_id_;
    std::size_t dimension_ = 0;
    std::size_t chunk_tokens_ = 128;
    std::vector<Chunk> chunks_;
};

inline CorpusIndex ingest(const std::vector<Document>& docs, const Embedder& embedder, std::size_t chunk_tokens = 128) {
    std::set<std::string> seen;
    std::vector<Chunk> chunks;
    for (const auto& d : docs) {
        if (!seen.insert(d.doc_id).second) throw InvalidArgument("duplicate doc_id '" + d.doc_id + "'");
        for (auto& c : chunk_document(d.doc_id, d.text, chunk_tokens)) {
            c.embedding = embedder.embed(c.text);
            chunks.push_back(std::move(c));
        }
    }
    return CorpusIndex(embedder.id(), embedder.dimension(), chunk_tokens, std::move(chunks));
}

inline std::vector<Chunk> retrieve(const CorpusIndex& index, const Embedder& embedder, std::string_view query,
                                   std::size_t k) {
    std::vector<Chunk> out;
    for (const auto& s : index.search(embedder, query, k)) out.push_back(*s.chunk);
    return out;
}

/// Reads JSON Lines of {"doc_id", "text"}; blank lines are skipped.
inline std::vector<Document> read_corpus_jsonl(std::istream& in) {
    std::vector<Document> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            docs.push_back({j.at("doc_id").get<std::string>(), j.at("text").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return docs;
}

inline std::vector<Document> read_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open corpus " + path);
    return read_corpus_jsonl(in);
}

} // namespace hybridrag
