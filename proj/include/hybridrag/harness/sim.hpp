#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hybridrag/backend.hpp"
#include "hybridrag/client_engine.hpp"
#include "hybridrag/coordinator.hpp"
#include "hybridrag/harness/metrics.hpp"
#include "hybridrag/memgen.hpp"
#include "hybridrag/retriever.hpp"

namespace hybridrag::harness {

enum class EventKind { type, accept, reject };

struct TraceEvent {
    double at = 0;  ///< virtual milliseconds
    EventKind kind = EventKind::type;
    std::string payload;
    std::optional<std::string> reference; ///< expected continuation for scoring
};

/// Uniform on [lo, hi]; lo == hi is a fixed duration.
struct Distribution {
    double lo = 0;
    double hi = 0;

    static Distribution fixed(double v) { return {v, v}; }

    double sample(std::mt19937_64& rng) const {
        if (hi <= lo) return lo;
        // 53-bit mantissa mapping keeps the draw identical across standard libraries.
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }
};

struct LatencyModel {
    Distribution client_infer = Distribution::fixed(20);
    double retrieval = 100;
    double generation = 880;
    double network_rtt = 100;

    double cloud_round_trip() const { return network_rtt + retrieval + generation; }

    void validate() const {
        if (client_infer.lo < 0 || client_infer.hi < client_infer.lo || retrieval < 0 || generation < 0 ||
            network_rtt < 0)
            throw InvalidArgument("latency model durations must be >= 0");
    }
};

/// Whether suggestions block on the cloud whenever memory is refreshed.
enum class CloudMode { async, sync };

struct SimBackends {
    const CorpusIndex* index = nullptr;
    const Embedder* embedder = nullptr;
    const LlmBackend* cloud = nullptr;  ///< takeaway generator
    const LlmBackend* client = nullptr; ///< suggestion model
    const LlmBackend* reference = nullptr; ///< reference generator for sweeps; defaults to `client`
};

struct SuggestionRecord {
    double at = 0;
    double latency_ms = 0;
    std::optional<std::size_t> staleness;
    RequestSeq memory_seq_used = 0;
    bool in_flight = false;
    std::string text;
    std::optional<double> gleu;
    std::optional<double> perplexity;
};

struct RunMetrics {
    std::vector<double> suggestion_latencies;
    std::size_t requests_issued = 0;
    std::size_t responses_applied = 0;
    std::size_t generation_failures = 0;
    std::size_t skipped_events = 0;
    std::vector<std::size_t> staleness_at_suggest;
    std::vector<double> gleu_scores;
    std::vector<double> perplexities;
    std::vector<SuggestionRecord> suggestions;
    std::vector<RequestSeq> request_log;
    std::vector<std::string> query_log;

    double mean_latency() const { return mean(suggestion_latencies); }
    double mean_staleness() const { return mean(staleness_at_suggest); }
    double mean_gleu() const { return mean(gleu_scores); }
    double mean_perplexity() const { return mean(perplexities); }
};

namespace detail {

struct PendingArrival {
    double at;
    std::uint64_t order;
    std::variant<MemoryResponse, RequestSeq> outcome; ///< response or failed seq
};

struct ArrivalLater {
    bool operator()(const PendingArrival& a, const PendingArrival& b) const {
        if (a.at != b.at) return a.at > b.at;
        return a.order > b.order;
    }
};

inline std::optional<std::string> reference_for(const std::vector<TraceEvent>& trace, std::size_t i,
                                                std::size_t max_tokens) {
    if (trace[i].reference) return truncate_tokens(*trace[i].reference, max_tokens);
    for (std::size_t j = i + 1; j < trace.size(); ++j) {
        if (trace[j].kind == EventKind::accept) continue;
        if (trim(trace[j].payload).empty()) continue;
        return truncate_tokens(trim(trace[j].payload), max_tokens);
    }
    return std::nullopt;
}

} // namespace detail

/// Discrete-event replay of a trace under a virtual clock.
///
/// Memory responses arrive at issue time + rtt + retrieval + generation and
/// are delivered before user events with the same timestamp. Each user event
/// produces one suggestion whose latency is one client_infer draw (async) or,
/// when the event issued a memory request, that draw plus the full cloud
/// round trip (sync).
inline RunMetrics run_trace(const std::vector<TraceEvent>& trace, const EngineConfig& cfg, const LatencyModel& lat,
                            const SimBackends& be, std::uint64_t seed = 0, CloudMode mode = CloudMode::async,
                            const std::string& session_id = "sim") {
    lat.validate();
    if (!be.index || !be.embedder || !be.cloud || !be.client) throw InvalidArgument("run_trace: backends missing");
    for (std::size_t i = 1; i < trace.size(); ++i)
        if (trace[i].at < trace[i - 1].at) throw InvalidArgument("trace events must be time-ordered");

    RunMetrics m;
    Session session(session_id, cfg);
    std::mt19937_64 infer_rng(seed);
    std::priority_queue<detail::PendingArrival, std::vector<detail::PendingArrival>, detail::ArrivalLater> arrivals;
    std::uint64_t order = 0;

    auto produce = [&](const MemoryRequest& req) -> std::variant<MemoryResponse, RequestSeq> {
        try {
            auto gen = generate_memory(req.query_text, *be.index, *be.embedder, *be.cloud, cfg);
            MemoryResponse r{req.session_id, req.request_seq, std::move(gen.entry), {}};
            r.timings = {Millis{lat.retrieval}, Millis{lat.generation}, Millis{lat.cloud_round_trip()}};
            return r;
        } catch (const MemoryGenerationFailed&) {
            ++m.generation_failures;
            return req.request_seq;
        }
    };
    std::function<void(std::optional<MemoryRequest>, double)> issue;
    auto deliver = [&](detail::PendingArrival a) {
        if (auto* r = std::get_if<MemoryResponse>(&a.outcome)) {
            r->entry.created_at = Millis{a.at};
            auto res = session.apply_response(*r);
            if (res.applied) ++m.responses_applied;
            issue(std::move(res.follow_up), a.at);
        } else {
            issue(session.request_failed(std::get<RequestSeq>(a.outcome)), a.at);
        }
    };
    issue = [&](std::optional<MemoryRequest> req, double at) {
        if (!req) return;
        ++m.requests_issued;
        m.request_log.push_back(req->request_seq);
        m.query_log.push_back(req->query_text);
        detail::PendingArrival a{at + lat.cloud_round_trip(), order++, produce(*req)};
        if (mode == CloudMode::sync) deliver(std::move(a));
        else arrivals.push(std::move(a));
    };

    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& ev = trace[i];
        while (!arrivals.empty() && arrivals.top().at <= ev.at) {
            auto a = arrivals.top();
            arrivals.pop();
            deliver(std::move(a));
        }

        UserEvent ue;
        switch (ev.kind) {
        case EventKind::type: ue = TypeEvent{ev.payload}; break;
        case EventKind::accept: ue = AcceptEvent{}; break;
        case EventKind::reject: ue = RejectEvent{ev.payload}; break;
        }
        if (ev.kind != EventKind::type && !session.pending_suggestion()) {
            ++m.skipped_events;
            if (ev.kind == EventKind::accept) continue;
            ue = TypeEvent{ev.payload};
        }
        const auto issued_before = m.requests_issued;
        issue(session.step(ue), ev.at);
        const bool waited = mode == CloudMode::sync && m.requests_issued > issued_before;

        if (session.text().empty()) continue;
        SuggestionRecord rec;
        rec.at = ev.at;
        rec.staleness = session.coordinator().staleness_tokens();
        rec.in_flight = session.coordinator().in_flight();
        Suggestion s;
        try {
            s = session.suggest(*be.client);
        } catch (const SuggestionFailed&) {
            continue;
        }
        rec.latency_ms = lat.client_infer.sample(infer_rng) + (waited ? lat.cloud_round_trip() : 0.0);
        rec.memory_seq_used = s.memory_seq_used;
        rec.text = s.text;
        if (auto ref = detail::reference_for(trace, i, cfg.max_suggest_tokens); ref && !ref->empty()) {
            const auto ref_toks = tokenize(*ref);
            rec.gleu = gleu(tokenize(s.text), ref_toks);
            m.gleu_scores.push_back(*rec.gleu);
            if (be.client->has_logprobs()) {
                rec.perplexity = perplexity(*be.client, s.prompt_used, ref_toks);
                m.perplexities.push_back(*rec.perplexity);
            }
        }
        m.suggestion_latencies.push_back(rec.latency_ms);
        if (rec.staleness) m.staleness_at_suggest.push_back(*rec.staleness);
        m.suggestions.push_back(std::move(rec));
    }
    return m;
}

struct SyncAsyncReport {
    double sync_mean_latency = 0;
    double async_mean_latency = 0;
    double speedup = 0;
    RunMetrics sync_run;
    RunMetrics async_run;
};

inline SyncAsyncReport compare_sync_async(const EngineConfig& cfg, const LatencyModel& lat,
                                          const std::vector<TraceEvent>& trace, const SimBackends& be,
                                          std::uint64_t seed = 0) {
    SyncAsyncReport r;
    r.sync_run = run_trace(trace, cfg, lat, be, seed, CloudMode::sync);
    r.async_run = run_trace(trace, cfg, lat, be, seed, CloudMode::async);
    if (r.async_run.suggestion_latencies.empty()) throw InvalidArgument("trace produced no suggestions");
    r.sync_mean_latency = r.sync_run.mean_latency();
    r.async_mean_latency = r.async_run.mean_latency();
    r.speedup = r.async_mean_latency > 0 ? r.sync_mean_latency / r.async_mean_latency : 1.0;
    return r;
}

/// A trace that types `text` in groups of `tokens_per_event` tokens.
inline std::vector<TraceEvent> typing_trace(const std::string& text, std::size_t tokens_per_event = 2,
                                            double interval_ms = 250, double start_ms = 0) {
    const auto toks = tokenize(text);
    std::vector<TraceEvent> out;
    std::span<const std::string> all(toks.tokens);
    for (std::size_t at = 0; at < all.size(); at += tokens_per_event) {
        auto group = all.subspan(at, std::min(tokens_per_event, all.size() - at));
        auto piece = detokenize(group);
        if (at > 0 && !::hybridrag::detail::attaches_left(group.front()) &&
            !::hybridrag::detail::attaches_right(all[at - 1]))
            piece.insert(piece.begin(), ' ');
        out.push_back({start_ms + interval_ms * static_cast<double>(out.size()), EventKind::type, std::move(piece), {}});
    }
    return out;
}

inline const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::type: return "type";
    case EventKind::accept: return "accept";
    default: return "reject";
    }
}

inline EventKind event_kind_from_string(const std::string& s) {
    if (s == "type") return EventKind::type;
    if (s == "accept") return EventKind::accept;
    if (s == "reject") return EventKind::reject;
    throw InvalidArgument("unknown trace event kind '" + s + "'");
}

/// Trace file: JSON Lines of {"at", "kind", "payload", "reference"?}.
inline std::vector<TraceEvent> read_trace_jsonl(std::istream& in) {
    std::vector<TraceEvent> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            TraceEvent e;
            e.at = j.at("at").get<double>();
            e.kind = event_kind_from_string(j.at("kind").get<std::string>());
            e.payload = j.value("payload", std::string{});
            if (j.contains("reference") && j.at("reference").is_string()) e.reference = j.at("reference").get<std::string>();
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("trace line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline void write_trace_jsonl(std::ostream& out, const std::vector<TraceEvent>& trace) {
    for (const auto& e : trace) {
        nlohmann::json j = {{"at", e.at}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
        if (e.reference) j["reference"] = *e.reference;
        out << j.dump() << '\n';
    }
}

inline LatencyModel latency_model_from_json(const nlohmann::json& j) {
    LatencyModel l;
    if (j.contains("client_infer_ms")) {
        const auto& c = j.at("client_infer_ms");
        if (c.is_array()) l.client_infer = {c.at(0).get<double>(), c.at(1).get<double>()};
        else l.client_infer = Distribution::fixed(c.get<double>());
    }
    l.retrieval = j.value("retrieval_ms", l.retrieval);
    l.generation = j.value("generation_ms", l.generation);
    l.network_rtt = j.value("network_rtt_ms", l.network_rtt);
    l.validate();
    return l;
}

/// Per-suggestion CSV for `sim run`.
inline void write_run_csv(std::ostream& out, const RunMetrics& m) {
    out << "version,index,at_ms,latency_ms,memory_seq_used,staleness_tokens,in_flight,gleu,perplexity\n";
    out << std::fixed << std::setprecision(6);
    for (std::size_t i = 0; i < m.suggestions.size(); ++i) {
        const auto& s = m.suggestions[i];
        out << "v1," << i << ',' << s.at << ',' << s.latency_ms << ',' << s.memory_seq_used << ',';
        if (s.staleness) out << *s.staleness;
        out << ',' << (s.in_flight ? 1 : 0) << ',';
        if (s.gleu) out << *s.gleu;
        out << ',';
        if (s.perplexity) out << *s.perplexity;
        out << '\n';
    }
}

} // namespace hybridrag::harness
