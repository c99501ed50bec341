#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridrag/backend.hpp"
#include "hybridrag/client_engine.hpp"
#include "hybridrag/core/log.hpp"
#include "hybridrag/core/sentences.hpp"
#include "hybridrag/memgen.hpp"
#include "hybridrag/retriever.hpp"

namespace hybridrag::harness {

/// Splits a document into sections at blank lines. WikiText-style heading
/// lines ("= Title =") also separate sections and are dropped.
inline std::vector<std::string> split_sections(std::string_view text) {
    std::vector<std::string> sections;
    std::string cur;
    auto flush = [&] {
        auto t = trim(cur);
        if (!t.empty()) sections.push_back(std::move(t));
        cur.clear();
    };
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = trim(text.substr(start, nl - start));
        start = nl + 1;
        const bool heading = line.size() >= 2 && line.front() == '=' && line.back() == '=';
        if (line.empty() || heading) {
            flush();
        } else {
            if (!cur.empty()) cur.push_back(' ');
            cur += line;
        }
        if (nl == text.size()) break;
    }
    flush();
    return sections;
}

/// Packs whole sentences into chunks of [min_tokens, max_tokens] tokens.
/// Oversize sentences are hard-split; a short leftover is merged into the
/// previous chunk when it fits and dropped otherwise.
inline std::vector<std::vector<std::string>> sentence_chunks(std::string_view text, std::size_t min_tokens = 16,
                                                             std::size_t max_tokens = 128) {
    if (min_tokens < 1 || max_tokens < min_tokens) throw InvalidArgument("bad sentence chunk bounds");
    std::vector<std::vector<std::string>> units;
    for (const auto& s : split_sentences(text)) {
        auto toks = tokenize(s).tokens;
        for (std::size_t at = 0; at < toks.size(); at += max_tokens)
            units.emplace_back(toks.begin() + static_cast<std::ptrdiff_t>(at),
                               toks.begin() + static_cast<std::ptrdiff_t>(std::min(toks.size(), at + max_tokens)));
    }
    std::vector<std::vector<std::string>> chunks;
    std::vector<std::string> cur;
    for (auto& u : units) {
        if (cur.size() + u.size() <= max_tokens) {
            cur.insert(cur.end(), u.begin(), u.end());
        } else if (cur.size() >= min_tokens) {
            chunks.push_back(std::move(cur));
            cur = std::move(u);
        } else {
            const std::size_t take = max_tokens - cur.size();
            cur.insert(cur.end(), u.begin(), u.begin() + static_cast<std::ptrdiff_t>(take));
            chunks.push_back(std::move(cur));
            cur.assign(u.begin() + static_cast<std::ptrdiff_t>(take), u.end());
        }
    }
    if (cur.size() >= min_tokens) {
        chunks.push_back(std::move(cur));
    } else if (!cur.empty()) {
        if (!chunks.empty() && chunks.back().size() + cur.size() <= max_tokens)
            chunks.back().insert(chunks.back().end(), cur.begin(), cur.end());
        else
            log::debug("dropping a " + std::to_string(cur.size()) + "-token tail below the chunk minimum");
    }
    return chunks;
}

struct TrainingTriplet {
    std::string prompt;
    std::vector<std::string> memory;
    std::string reference;

    std::string doc_id;
    std::size_t chunk_tokens = 0;
    std::size_t prompt_tokens = 0;
    double split_ratio = 0;

    nlohmann::json to_json() const { return {{"prompt", prompt}, {"memory", memory}, {"reference", reference}}; }
};

struct TripletOptions {
    std::size_t min_chunk_tokens = 16;
    std::size_t max_chunk_tokens = 128;
    double min_split_ratio = 0.125;
    double max_split_ratio = 0.5;
    std::size_t reference_max_tokens = 44;
};

/// Builds (prompt, memory, reference) records. For each document the first
/// section is cut into sentence chunks; each chunk is truncated at a seeded
/// split ratio to form the prompt; memory comes from the document's other
/// sections; the reference is the reference backend's completion of the
/// instruction-enhanced prompt.
inline std::vector<TrainingTriplet> prepare_training_triplets(const std::vector<Document>& docs,
                                                              const Embedder& embedder,
                                                              const LlmBackend& memory_backend,
                                                              const LlmBackend& reference_backend, std::uint64_t seed,
                                                              const EngineConfig& cfg = {},
                                                              const TripletOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    auto draw_ratio = [&] {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        return opt.min_split_ratio + (opt.max_split_ratio - opt.min_split_ratio) * u;
    };

    std::vector<TrainingTriplet> out;
    for (const auto& doc : docs) {
        const auto sections = split_sections(doc.text);
        std::vector<Document> rest;
        for (std::size_t i = 1; i < sections.size(); ++i)
            rest.push_back({doc.doc_id + "/s" + std::to_string(i), sections[i]});
        if (rest.empty()) {
            log::warn("document '" + doc.doc_id + "' has no sections beyond the first; skipped");
            continue;
        }
        const auto index = ingest(rest, embedder, cfg.chunk_tokens);
        if (index.empty()) {
            log::warn("document '" + doc.doc_id + "' has empty remaining sections; skipped");
            continue;
        }
        for (const auto& chunk : sentence_chunks(sections[0], opt.min_chunk_tokens, opt.max_chunk_tokens)) {
            TrainingTriplet t;
            t.doc_id = doc.doc_id;
            t.chunk_tokens = chunk.size();
            t.split_ratio = draw_ratio();
            t.prompt_tokens = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(t.split_ratio * static_cast<double>(chunk.size()))));
            t.prompt = detokenize(std::span<const std::string>(chunk).first(t.prompt_tokens));

            Memory memory(cfg.memory_capacity);
            try {
                auto gen = generate_memory(t.prompt, index, embedder, memory_backend, cfg);
                gen.entry.source_request_seq = 1;
                t.memory = gen.entry.bullets;
                memory.push(std::move(gen.entry));
            } catch (const MemoryGenerationFailed& e) {
                log::warn("no memory for a chunk of '" + doc.doc_id + "': " + e.what());
            }
            t.reference = truncate_tokens(
                reference_backend.complete({build_completion_prompt(t.prompt, memory), opt.reference_max_tokens, 0.0, 1.0}),
                opt.reference_max_tokens);
            out.push_back(std::move(t));
        }
    }
    return out;
}

inline void write_triplets_jsonl(std::ostream& out, const std::vector<TrainingTriplet>& triplets) {
    for (const auto& t : triplets) out << t.to_json().dump() << '\n';
}

} // namespace hybridrag::harness
