#pragma once

#include <iomanip>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "hybridrag/client_engine.hpp"
#include "hybridrag/harness/metrics.hpp"
#include "hybridrag/harness/sim.hpp"
#include "hybridrag/memgen.hpp"

namespace hybridrag::harness {

struct SweepOptions {
    std::size_t tokens_per_event = 2;
    double interval_ms = 250;
    LatencyModel latency;
    std::uint64_t seed = 0;

    // lagged-memory evaluation
    std::size_t min_prompt_tokens = 32;
    std::size_t eval_stride = 24;
    std::size_t query_window = 64;
};

struct SweepRow {
    std::size_t tau = 0;
    std::size_t requests_issued = 0;
    double mean_staleness = 0;
    double gleu = 0;           ///< against references from fresh (synchronous) memory
    double gleu_async_ref = 0; ///< against references from the same lagged memory
    double gleu_truth = 0;     ///< against the document's actual continuation
    double perplexity = 0;     ///< of the synchronous reference under the client
    std::size_t samples = 0;
};

namespace detail {

class MemoryCache {
public:
    MemoryCache(const SimBackends& be, const EngineConfig& cfg) : be_(be), cfg_(cfg) {}

    const Memory& get(const std::string& query) {
        auto it = cache_.find(query);
        if (it != cache_.end()) return it->second;
        Memory mem(cfg_.memory_capacity);
        try {
            auto gen = generate_memory(query, *be_.index, *be_.embedder, *be_.cloud, cfg_);
            gen.entry.source_request_seq = 1;
            mem.push(std::move(gen.entry));
        } catch (const MemoryGenerationFailed&) {
        }
        return cache_.emplace(query, std::move(mem)).first->second;
    }

private:
    const SimBackends& be_;
    const EngineConfig& cfg_;
    std::map<std::string, Memory> cache_;
};

} // namespace detail

/// For each tau: replays typing traces of every document to count requests
/// and staleness, then scores suggestions made from the full prompt while
/// memory was generated from a prefix lagging it by tau tokens.
inline std::vector<SweepRow> threshold_sweep(const std::vector<Document>& docs, const std::vector<std::size_t>& taus,
                                             const EngineConfig& cfg, const SimBackends& be,
                                             const SweepOptions& opt = {}) {
    if (taus.empty()) throw InvalidArgument("threshold_sweep needs at least one tau");
    const LlmBackend* ref_backend = be.reference ? be.reference : be.client;
    detail::MemoryCache memories(be, cfg);
    std::vector<SweepRow> rows;

    for (std::size_t tau : taus) {
        EngineConfig c = cfg;
        c.tau = tau;
        SweepRow row;
        row.tau = tau;

        std::vector<std::size_t> staleness;
        for (std::size_t d = 0; d < docs.size(); ++d) {
            const auto trace = typing_trace(docs[d].text, opt.tokens_per_event, opt.interval_ms);
            if (trace.empty()) continue;
            auto m = run_trace(trace, c, opt.latency, be, opt.seed + d, CloudMode::async, docs[d].doc_id);
            row.requests_issued += m.requests_issued;
            staleness.insert(staleness.end(), m.staleness_at_suggest.begin(), m.staleness_at_suggest.end());
        }
        row.mean_staleness = mean(staleness);

        std::vector<double> g_sync, g_async, g_truth, ppl;
        for (const auto& doc : docs) {
            const auto toks = tokenize(doc.text).tokens;
            std::span<const std::string> all(toks);
            for (std::size_t p = opt.min_prompt_tokens; p + 1 < toks.size(); p += opt.eval_stride) {
                const std::size_t lag_end = p - std::min(tau, p - 1);
                auto window = [&](std::size_t end) {
                    const std::size_t begin = end - std::min(opt.query_window, end);
                    return detokenize(all.subspan(begin, end - begin));
                };
                const std::string prompt_text = detokenize(all.first(p));
                const Memory& lagged = memories.get(window(lag_end));
                const Memory& fresh = memories.get(window(p));
                const auto lagged_prompt = build_completion_prompt(prompt_text, lagged);
                const auto fresh_prompt = build_completion_prompt(prompt_text, fresh);
                const CompletionRequest creq{lagged_prompt, c.max_suggest_tokens, 0.0, 1.0};

                const auto hyp = tokenize(truncate_tokens(be.client->complete(creq), c.max_suggest_tokens));
                const auto sync_ref =
                    tokenize(truncate_tokens(ref_backend->complete({fresh_prompt, c.max_suggest_tokens, 0.0, 1.0}),
                                             c.max_suggest_tokens));
                const auto async_ref = tokenize(truncate_tokens(ref_backend->complete(creq), c.max_suggest_tokens));
                const auto truth =
                    TokenSeq{{toks.begin() + static_cast<std::ptrdiff_t>(p),
                              toks.begin() + static_cast<std::ptrdiff_t>(std::min(toks.size(), p + c.max_suggest_tokens))},
                             {}};
                ++row.samples;
                if (!sync_ref.empty()) {
                    g_sync.push_back(gleu(hyp, sync_ref));
                    if (be.client->has_logprobs()) ppl.push_back(perplexity(*be.client, lagged_prompt, sync_ref));
                }
                if (!async_ref.empty()) g_async.push_back(gleu(hyp, async_ref));
                g_truth.push_back(gleu(hyp, truth));
            }
        }
        row.gleu = mean(g_sync);
        row.gleu_async_ref = mean(g_async);
        row.gleu_truth = mean(g_truth);
        row.perplexity = mean(ppl);
        rows.push_back(row);
    }
    return rows;
}

/// Fixed, versioned CSV schema for sweep output.
inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "version,tau,requests_issued,mean_staleness,gleu,gleu_async_ref,gleu_truth,perplexity,samples\n";
    out << std::fixed << std::setprecision(6);
    for (const auto& r : rows)
        out << "v1," << r.tau << ',' << r.requests_issued << ',' << r.mean_staleness << ',' << r.gleu << ','
            << r.gleu_async_ref << ',' << r.gleu_truth << ',' << r.perplexity << ',' << r.samples << '\n';
}

} // namespace hybridrag::harness
