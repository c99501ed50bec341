#pragma once

#include <chrono>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "hybridrag/backend.hpp"
#include "hybridrag/coordinator.hpp"
#include "hybridrag/core/log.hpp"
#include "hybridrag/core/sentences.hpp"
#include "hybridrag/core/tokenizer.hpp"
#include "hybridrag/core/types.hpp"
#include "hybridrag/prompts.hpp"
#include "hybridrag/retriever.hpp"

namespace hybridrag {

/// Re-splits each chunk into passages of whole sentences, at most
/// `max_passage_tokens` tokens each. Passages never span two chunks.
/// A sentence longer than the cap is hard-split into cap-sized pieces.
inline std::vector<std::string> split_for_generation(const std::vector<Chunk>& chunks, std::size_t max_passage_tokens) {
    if (max_passage_tokens < 16) throw InvalidArgument("max_passage_tokens must be >= 16");
    std::vector<std::string> passages;
    for (const auto& chunk : chunks) {
        std::vector<std::string> cur;
        std::size_t cur_tokens = 0;
        auto flush = [&] {
            if (cur.empty()) return;
            std::string p;
            for (const auto& s : cur) {
                if (!p.empty()) p.push_back(' ');
                p += s;
            }
            passages.push_back(std::move(p));
            cur.clear();
            cur_tokens = 0;
        };
        for (auto& sentence : split_sentences(chunk.text)) {
            const TokenSeq toks = tokenize(sentence);
            if (toks.size() > max_passage_tokens) {
                flush();
                log::warn("sentence of " + std::to_string(toks.size()) + " tokens in " + chunk.doc_id + "#" +
                          std::to_string(chunk.chunk_index) + " exceeds the passage cap of " +
                          std::to_string(max_passage_tokens) + "; hard-splitting");
                std::span<const std::string> all(toks.tokens);
                for (std::size_t at = 0; at < all.size(); at += max_passage_tokens)
                    passages.push_back(detokenize(all.subspan(at, std::min(max_passage_tokens, all.size() - at))));
                continue;
            }
            if (cur_tokens + toks.size() > max_passage_tokens) flush();
            cur_tokens += toks.size();
            cur.push_back(std::move(sentence));
        }
        flush();
    }
    return passages;
}

struct TakeawayPrompt {
    std::string instruction_header{prompts::kTakeawayInstruction};
    std::vector<std::pair<std::string, std::string>> passages; ///< (label "P{i}", text)
    std::string trailer{prompts::kTakeawayTrailer};

    std::string render() const {
        std::string out = instruction_header;
        out.push_back('\n');
        for (const auto& [label, text] : passages) {
            out += label;
            out += ": ";
            out += text;
            out.push_back('\n');
        }
        out += trailer;
        return out;
    }
};

inline TakeawayPrompt build_takeaway_prompt(const std::vector<std::string>& passages) {
    if (passages.empty()) throw InvalidArgument("takeaway prompt needs at least one passage");
    TakeawayPrompt p;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        std::string text = passages[i];
        for (auto& c : text)
            if (c == '\n' || c == '\r') c = ' ';
        p.passages.emplace_back("P" + std::to_string(i + 1), std::move(text));
    }
    return p;
}

/// Truncates to the first `max_words` whitespace-delimited words.
inline std::string truncate_words(const std::string& text, std::size_t max_words = kMaxBulletWords) {
    auto words = split_words(text);
    if (words.size() <= max_words) return text;
    std::string out;
    for (std::size_t i = 0; i < max_words; ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

namespace detail {

inline void collect_bullets(std::string_view block, std::vector<std::string>& out) {
    std::size_t start = 0;
    while (start < block.size()) {
        auto nl = block.find('\n', start);
        if (nl == std::string_view::npos) nl = block.size();
        auto line = trim(block.substr(start, nl - start));
        start = nl + 1;
        if (!line.starts_with(prompts::kBulletPrefix)) continue;
        auto bullet = trim(std::string_view(line).substr(prompts::kBulletPrefix.size()));
        if (!bullet.empty()) out.push_back(truncate_words(bullet));
    }
}

} // namespace detail

/// Parses a takeaway completion into one bullet list per passage, without
/// failing on zero bullets. Text before the first "### P{i}:" marker belongs
/// to P1, since the prompt trailer already opened it.
inline std::vector<std::vector<std::string>> parse_takeaways_lenient(const std::string& output,
                                                                     std::size_t expected_passages) {
    if (expected_passages < 1) throw InvalidArgument("expected_passages must be >= 1");
    static const std::regex marker(R"(###\s*P(\d+)\s*:)");
    std::vector<std::vector<std::string>> groups(expected_passages);
    std::size_t label = 1;
    std::size_t block_start = 0;
    auto emit = [&](std::size_t end) {
        if (label >= 1 && label <= expected_passages)
            detail::collect_bullets(std::string_view(output).substr(block_start, end - block_start), groups[label - 1]);
    };
    for (auto it = std::sregex_iterator(output.begin(), output.end(), marker); it != std::sregex_iterator(); ++it) {
        emit(static_cast<std::size_t>(it->position()));
        label = std::stoul((*it)[1].str());
        block_start = static_cast<std::size_t>(it->position() + it->length());
    }
    emit(output.size());
    return groups;
}

inline std::vector<std::vector<std::string>> parse_takeaways(const std::string& output, std::size_t expected_passages) {
    auto groups = parse_takeaways_lenient(output, expected_passages);
    for (const auto& g : groups)
        if (!g.empty()) return groups;
    throw MemoryGenerationFailed("LLM output contains no key-takeaway bullets", "no_bullets");
}

/// Groups passages into backend calls: at most `passages_per_call` each,
/// and a new call starts before the rendered prompt would exceed the
/// token budget (a lone oversize passage still gets its own call).
inline std::vector<std::vector<std::string>> batch_passages(const std::vector<std::string>& passages,
                                                           std::size_t passages_per_call,
                                                           std::size_t prompt_token_budget) {
    const std::size_t fixed = count_tokens(prompts::kTakeawayInstruction) + count_tokens(prompts::kTakeawayTrailer);
    std::vector<std::vector<std::string>> batches;
    std::size_t used = fixed;
    for (const auto& p : passages) {
        const std::size_t cost = count_tokens(p) + 2; // "P{i}" ":"
        if (batches.empty() || batches.back().size() >= passages_per_call ||
            (used + cost > prompt_token_budget && !batches.back().empty())) {
            batches.emplace_back();
            used = fixed;
        }
        batches.back().push_back(p);
        used += cost;
    }
    return batches;
}

struct GeneratedMemory {
    MemoryEntry entry;
    StageTimings timings;
    std::size_t passages = 0;
    std::size_t backend_calls = 0;
};

/// Retrieve, split, prompt, parse: one memory entry for `query`.
inline GeneratedMemory generate_memory(const std::string& query, const CorpusIndex& index, const Embedder& embedder,
                                       const LlmBackend& backend, const EngineConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    GeneratedMemory out;

    const auto chunks = retrieve(index, embedder, query, cfg.k);
    const auto t1 = clock::now();

    const auto passages = split_for_generation(chunks, cfg.max_passage_tokens);
    out.passages = passages.size();
    for (const auto& batch : batch_passages(passages, cfg.passages_per_call, cfg.prompt_token_budget)) {
        const auto prompt = build_takeaway_prompt(batch).render();
        std::string text;
        try {
            ++out.backend_calls;
            text = backend.complete({prompt, cfg.max_memory_tokens, 0.0, 1.0});
        } catch (const BackendTimeout& e) {
            throw MemoryGenerationFailed(std::string("backend timed out: ") + e.what(), "backend_timeout");
        } catch (const std::exception& e) {
            throw MemoryGenerationFailed(std::string("backend call failed: ") + e.what(), "backend_error");
        }
        for (auto& group : parse_takeaways_lenient(text, batch.size()))
            for (auto& b : group) out.entry.bullets.push_back(std::move(b));
    }
    if (out.entry.bullets.empty())
        throw MemoryGenerationFailed("LLM output contains no key-takeaway bullets", "no_bullets");

    const auto t2 = clock::now();
    out.timings.retrieval = std::chrono::duration_cast<Millis>(t1 - t0);
    out.timings.generation = std::chrono::duration_cast<Millis>(t2 - t1);
    out.timings.total = std::chrono::duration_cast<Millis>(clock::now() - t0);
    return out;
}

} // namespace hybridrag
